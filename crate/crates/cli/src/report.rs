//! Report emission: a minimal JSON writer with fixed key order and
//! 17-significant-digit floats, plus the human-readable table helpers.

use num_complex::Complex64;

use seqbell_core::bell::ChshSettings;
use seqbell_core::qcore::CMatrix;

/// JSON writer that emits keys in insertion order and formats every
/// float with 17 significant digits, so outputs are reproducible
/// byte-for-byte and round-trip exactly.
pub struct JsonWriter {
    buf: String,
    needs_comma: Vec<bool>,
}

impl JsonWriter {
    pub fn new() -> Self {
        Self { buf: String::new(), needs_comma: vec![false] }
    }

    fn pre_value(&mut self) {
        if *self.needs_comma.last().unwrap() {
            self.buf.push(',');
        }
        *self.needs_comma.last_mut().unwrap() = true;
    }

    pub fn begin_object(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('{');
        self.needs_comma.push(false);
        self
    }

    pub fn end_object(&mut self) -> &mut Self {
        self.buf.push('}');
        self.needs_comma.pop();
        self
    }

    pub fn begin_array(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('[');
        self.needs_comma.push(false);
        self
    }

    pub fn end_array(&mut self) -> &mut Self {
        self.buf.push(']');
        self.needs_comma.pop();
        self
    }

    pub fn key(&mut self, name: &str) -> &mut Self {
        self.pre_value();
        self.buf.push('"');
        self.buf.push_str(name);
        self.buf.push_str("\":");
        // The value after a key must not get its own comma.
        *self.needs_comma.last_mut().unwrap() = false;
        self
    }

    pub fn number(&mut self, value: f64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&format_float(value));
        self
    }

    pub fn integer(&mut self, value: i64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&value.to_string());
        self
    }

    pub fn boolean(&mut self, value: bool) -> &mut Self {
        self.pre_value();
        self.buf.push_str(if value { "true" } else { "false" });
        self
    }

    pub fn null(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push_str("null");
        self
    }

    pub fn string(&mut self, value: &str) -> &mut Self {
        self.pre_value();
        self.buf.push('"');
        for c in value.chars() {
            match c {
                '"' => self.buf.push_str("\\\""),
                '\\' => self.buf.push_str("\\\\"),
                '\n' => self.buf.push_str("\\n"),
                c if (c as u32) < 0x20 => {
                    self.buf.push_str(&format!("\\u{:04x}", c as u32));
                }
                c => self.buf.push(c),
            }
        }
        self.buf.push('"');
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// 17 significant digits; parses back to the identical f64.
pub fn format_float(value: f64) -> String {
    if value == value.trunc() && value.abs() < 1e15 {
        format!("{value:.1}")
    } else {
        format!("{value:.16e}")
    }
}

pub fn write_number_option(json: &mut JsonWriter, value: Option<f64>) {
    match value {
        Some(v) => {
            json.number(v);
        }
        None => {
            json.null();
        }
    }
}

/// Complex matrix as nested [re, im] pairs.
pub fn write_matrix(json: &mut JsonWriter, m: &CMatrix) {
    json.begin_array();
    for i in 0..m.rows() {
        json.begin_array();
        for j in 0..m.cols() {
            let z = m.get(i, j);
            json.begin_array();
            json.number(z.re);
            json.number(z.im);
            json.end_array();
        }
        json.end_array();
    }
    json.end_array();
}

pub fn write_vec3(json: &mut JsonWriter, v: [f64; 3]) {
    json.begin_array();
    for x in v {
        json.number(x);
    }
    json.end_array();
}

pub fn write_settings(json: &mut JsonWriter, s: &ChshSettings) {
    json.begin_object();
    json.key("a");
    write_vec3(json, s.a.direction());
    json.key("a_prime");
    write_vec3(json, s.a_prime.direction());
    json.key("b");
    write_vec3(json, s.b.direction());
    json.key("b_prime");
    write_vec3(json, s.b_prime.direction());
    json.end_object();
}

/// Human-readable complex entry for table output.
pub fn display_complex(z: Complex64) -> String {
    format!("{:+.6}{:+.6}i", z.re, z.im)
}

/// Renders a matrix as aligned rows for table output.
pub fn display_matrix(m: &CMatrix, indent: &str) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        out.push_str(indent);
        for j in 0..m.cols() {
            out.push_str(&display_complex(m.get(i, j)));
            out.push_str("  ");
        }
        out.push('\n');
    }
    out
}

pub fn display_vec3(v: [f64; 3]) -> String {
    format!("({:+.6}, {:+.6}, {:+.6})", v[0], v[1], v[2])
}
