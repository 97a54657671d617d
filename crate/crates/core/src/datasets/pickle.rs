//! A restricted unpickler: enough of protocols 0-4 to read numpy arrays,
//! scipy CSR matrices and `defaultdict(list)` objects written by Python 2 or
//! Python 3. Nothing is executed; callables are recorded by name and a few
//! well-known ones are interpreted structurally.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::CsrMatrix;

#[derive(Debug, Clone)]
pub enum PickleValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Tuple(Vec<PickleValue>),
    List(Rc<RefCell<Vec<PickleValue>>>),
    Dict(Rc<RefCell<Vec<(PickleValue, PickleValue)>>>),
    Global(String, String),
    Object(Rc<RefCell<PickleObject>>),
}

#[derive(Debug, Clone)]
pub struct PickleObject {
    pub module: String,
    pub name: String,
    pub args: Vec<PickleValue>,
    pub state: Option<PickleValue>,
}

impl PickleValue {
    fn list(items: Vec<PickleValue>) -> PickleValue {
        PickleValue::List(Rc::new(RefCell::new(items)))
    }

    fn dict(items: Vec<(PickleValue, PickleValue)>) -> PickleValue {
        PickleValue::Dict(Rc::new(RefCell::new(items)))
    }

    /// Text content of a `str`, or of a Python 2 byte string read as latin-1.
    pub fn as_text(&self) -> Option<String> {
        match self {
            PickleValue::Str(s) => Some(s.clone()),
            PickleValue::Bytes(b) => Some(b.iter().map(|&c| c as char).collect()),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PickleValue::Int(i) => Some(*i),
            PickleValue::Bool(b) => Some(i64::from(*b)),
            _ => None,
        }
    }

    /// Raw bytes of a bytes object or of a latin-1 string.
    fn as_raw_bytes(&self) -> Option<Vec<u8>> {
        match self {
            PickleValue::Bytes(b) => Some(b.clone()),
            PickleValue::Str(s) => s.chars().map(|c| u8::try_from(c as u32).ok()).collect(),
            _ => None,
        }
    }

    fn items(&self) -> Option<Vec<PickleValue>> {
        match self {
            PickleValue::Tuple(v) => Some(v.clone()),
            PickleValue::List(v) => Some(v.borrow().clone()),
            _ => None,
        }
    }

    /// Looks up a string key in a dict.
    pub fn get(&self, key: &str) -> Option<PickleValue> {
        match self {
            PickleValue::Dict(d) => d
                .borrow()
                .iter()
                .find(|(k, _)| k.as_text().as_deref() == Some(key))
                .map(|(_, v)| v.clone()),
            _ => None,
        }
    }

    fn class(&self) -> Option<(String, String)> {
        match self {
            PickleValue::Object(o) => {
                let o = o.borrow();
                Some((o.module.clone(), o.name.clone()))
            }
            _ => None,
        }
    }
}

enum Item {
    Mark,
    Value(PickleValue),
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.data.len() {
            return Err(format!("truncated pickle at byte {}", self.pos));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> std::result::Result<i32, String> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn line_bytes(&mut self) -> std::result::Result<&'a [u8], String> {
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
            self.pos += 1;
        }
        if self.pos >= self.data.len() {
            return Err("unterminated text line in pickle".into());
        }
        let s = &self.data[start..self.pos];
        self.pos += 1;
        Ok(s)
    }

    fn line(&mut self) -> std::result::Result<&'a str, String> {
        let s = self.line_bytes()?;
        std::str::from_utf8(s).map_err(|e| format!("non-utf8 text line: {e}"))
    }
}

struct Machine {
    stack: Vec<Item>,
    memo: std::collections::HashMap<u64, PickleValue>,
}

impl Machine {
    fn push(&mut self, v: PickleValue) {
        self.stack.push(Item::Value(v));
    }

    fn pop(&mut self) -> std::result::Result<PickleValue, String> {
        match self.stack.pop() {
            Some(Item::Value(v)) => Ok(v),
            Some(Item::Mark) => Err("unexpected mark on stack".into()),
            None => Err("pop from empty stack".into()),
        }
    }

    fn top(&self) -> std::result::Result<&PickleValue, String> {
        match self.stack.last() {
            Some(Item::Value(v)) => Ok(v),
            _ => Err("expected a value on top of the stack".into()),
        }
    }

    fn pop_mark(&mut self) -> std::result::Result<Vec<PickleValue>, String> {
        let mut out = Vec::new();
        loop {
            match self.stack.pop() {
                Some(Item::Mark) => break,
                Some(Item::Value(v)) => out.push(v),
                None => return Err("mark not found".into()),
            }
        }
        out.reverse();
        Ok(out)
    }

    fn memo_get(&self, k: u64) -> std::result::Result<PickleValue, String> {
        self.memo
            .get(&k)
            .cloned()
            .ok_or_else(|| format!("memo key {k} missing"))
    }

    fn memo_put(&mut self, k: u64) -> std::result::Result<(), String> {
        let v = self.top()?.clone();
        self.memo.insert(k, v);
        Ok(())
    }
}

fn append_to(target: &PickleValue, items: Vec<PickleValue>) -> std::result::Result<(), String> {
    match target {
        PickleValue::List(l) => {
            l.borrow_mut().extend(items);
            Ok(())
        }
        _ => Err("APPEND target is not a list".into()),
    }
}

fn set_items(target: &PickleValue, pairs: Vec<PickleValue>) -> std::result::Result<(), String> {
    let PickleValue::Dict(d) = target else {
        return Err("SETITEM target is not a dict".into());
    };
    if pairs.len() % 2 != 0 {
        return Err("odd number of SETITEMS entries".into());
    }
    let mut d = d.borrow_mut();
    let mut it = pairs.into_iter();
    while let (Some(k), Some(v)) = (it.next(), it.next()) {
        d.push((k, v));
    }
    Ok(())
}

/// Interprets a call `module.name(*args)` without running anything.
fn call(module: &str, name: &str, args: Vec<PickleValue>) -> std::result::Result<PickleValue, String> {
    match (module, name) {
        ("_codecs", "encode") => {
            let text = args
                .first()
                .and_then(PickleValue::as_text)
                .ok_or("_codecs.encode without a string")?;
            let bytes = text
                .chars()
                .map(|c| u8::try_from(c as u32).map_err(|_| "non latin-1 char in encoded bytes"))
                .collect::<std::result::Result<Vec<u8>, _>>()?;
            Ok(PickleValue::Bytes(bytes))
        }
        ("collections", "defaultdict") | ("collections", "OrderedDict") => {
            Ok(PickleValue::dict(Vec::new()))
        }
        ("__builtin__", "list") | ("builtins", "list") => Ok(PickleValue::list(
            args.into_iter().next().and_then(|a| a.items()).unwrap_or_default(),
        )),
        ("copy_reg", "_reconstructor") | ("copyreg", "_reconstructor") => {
            match args.into_iter().next() {
                Some(PickleValue::Global(m, n)) => Ok(object(m, n, Vec::new())),
                _ => Err("_reconstructor without a class".into()),
            }
        }
        _ => Ok(object(module.to_string(), name.to_string(), args)),
    }
}

fn object(module: String, name: String, args: Vec<PickleValue>) -> PickleValue {
    PickleValue::Object(Rc::new(RefCell::new(PickleObject {
        module,
        name,
        args,
        state: None,
    })))
}

fn parse_int_line(s: &str) -> std::result::Result<PickleValue, String> {
    let t = s.trim().trim_end_matches('L');
    match t {
        "00" => Ok(PickleValue::Bool(false)),
        "01" => Ok(PickleValue::Bool(true)),
        _ => t
            .parse::<i64>()
            .map(PickleValue::Int)
            .map_err(|e| format!("bad integer literal `{s}`: {e}")),
    }
}

fn parse_long_bytes(b: &[u8]) -> std::result::Result<PickleValue, String> {
    if b.is_empty() {
        return Ok(PickleValue::Int(0));
    }
    if b.len() > 8 {
        return Err("integer wider than 64 bits".into());
    }
    let neg = b[b.len() - 1] & 0x80 != 0;
    let mut buf = [if neg { 0xff } else { 0 }; 8];
    buf[..b.len()].copy_from_slice(b);
    Ok(PickleValue::Int(i64::from_le_bytes(buf)))
}

/// Decodes a protocol-0 quoted string literal (`'...'` with escapes).
fn parse_quoted(s: &str) -> std::result::Result<Vec<u8>, String> {
    let s = s.trim();
    let q = s.chars().next().ok_or("empty string literal")?;
    if !(q == '\'' || q == '"') || !s.ends_with(q) || s.len() < 2 {
        return Err(format!("bad string literal {s}"));
    }
    unescape(&s[1..s.len() - 1])
}

fn unescape(body: &str) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c != b'\\' {
            out.push(c);
            i += 1;
            continue;
        }
        let e = *bytes.get(i + 1).ok_or("dangling escape")?;
        i += 2;
        match e {
            b'n' => out.push(b'\n'),
            b't' => out.push(b'\t'),
            b'r' => out.push(b'\r'),
            b'\\' => out.push(b'\\'),
            b'\'' => out.push(b'\''),
            b'"' => out.push(b'"'),
            b'x' => {
                let h = body.get(i..i + 2).ok_or("short \\x escape")?;
                out.push(u8::from_str_radix(h, 16).map_err(|e| e.to_string())?);
                i += 2;
            }
            b'0'..=b'7' => {
                let mut v = u32::from(e - b'0');
                let mut n = 1;
                while n < 3 && i < bytes.len() && (b'0'..=b'7').contains(&bytes[i]) {
                    v = v * 8 + u32::from(bytes[i] - b'0');
                    i += 1;
                    n += 1;
                }
                out.push(v as u8);
            }
            other => {
                out.push(b'\\');
                out.push(other);
            }
        }
    }
    Ok(out)
}

/// Protocol-0 `UNICODE` payload: raw-unicode-escape.
fn parse_raw_unicode(s: &str) -> std::result::Result<String, String> {
    let mut out = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' && matches!(chars.peek(), Some('u') | Some('U')) {
            let width = if chars.next() == Some('u') { 4 } else { 8 };
            let hex: String = (0..width).filter_map(|_| chars.next()).collect();
            let code = u32::from_str_radix(&hex, 16).map_err(|e| e.to_string())?;
            out.push(char::from_u32(code).ok_or("invalid code point")?);
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Parses a pickle stream into a value tree.
pub fn unpickle(data: &[u8]) -> Result<PickleValue> {
    run(data).map_err(Error::input)
}

fn run(data: &[u8]) -> std::result::Result<PickleValue, String> {
    let mut r = Reader { data, pos: 0 };
    let mut m = Machine {
        stack: Vec::new(),
        memo: std::collections::HashMap::new(),
    };
    loop {
        let op = r.byte()?;
        match op {
            0x80 => {
                r.byte()?;
            }
            0x95 => {
                r.u64()?;
            }
            b'.' => return m.pop(),
            b'(' => m.stack.push(Item::Mark),
            b'N' => m.push(PickleValue::None),
            0x88 => m.push(PickleValue::Bool(true)),
            0x89 => m.push(PickleValue::Bool(false)),
            b'I' => {
                let v = parse_int_line(r.line()?)?;
                m.push(v);
            }
            b'L' => {
                let v = parse_int_line(r.line()?)?;
                m.push(v);
            }
            b'J' => {
                let v = r.i32()?;
                m.push(PickleValue::Int(i64::from(v)));
            }
            b'K' => {
                let v = r.byte()?;
                m.push(PickleValue::Int(i64::from(v)));
            }
            b'M' => {
                let v = r.u16()?;
                m.push(PickleValue::Int(i64::from(v)));
            }
            0x8a => {
                let n = r.byte()? as usize;
                let v = parse_long_bytes(r.take(n)?)?;
                m.push(v);
            }
            0x8b => {
                let n = r.i32()?;
                let n = usize::try_from(n).map_err(|_| "negative LONG4 length")?;
                let v = parse_long_bytes(r.take(n)?)?;
                m.push(v);
            }
            b'F' => {
                let s = r.line()?;
                let v = s.trim().parse::<f64>().map_err(|e| format!("bad float: {e}"))?;
                m.push(PickleValue::Float(v));
            }
            b'G' => {
                let v = f64::from_be_bytes(r.take(8)?.try_into().unwrap());
                m.push(PickleValue::Float(v));
            }
            b'S' => {
                let v = parse_quoted(r.line()?)?;
                m.push(PickleValue::Bytes(v));
            }
            b'T' => {
                let n = usize::try_from(r.i32()?).map_err(|_| "negative BINSTRING length")?;
                let v = r.take(n)?.to_vec();
                m.push(PickleValue::Bytes(v));
            }
            b'U' => {
                let n = r.byte()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(PickleValue::Bytes(v));
            }
            b'B' => {
                let n = r.u32()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(PickleValue::Bytes(v));
            }
            b'C' => {
                let n = r.byte()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(PickleValue::Bytes(v));
            }
            0x8e => {
                let n = r.u64()? as usize;
                let v = r.take(n)?.to_vec();
                m.push(PickleValue::Bytes(v));
            }
            b'V' => {
                let latin1: String = r.line_bytes()?.iter().map(|&b| b as char).collect();
                let v = parse_raw_unicode(&latin1)?;
                m.push(PickleValue::Str(v));
            }
            b'X' | 0x8c | 0x8d => {
                let n = match op {
                    b'X' => r.u32()? as usize,
                    0x8c => r.byte()? as usize,
                    _ => r.u64()? as usize,
                };
                let s = std::str::from_utf8(r.take(n)?).map_err(|e| e.to_string())?;
                m.push(PickleValue::Str(s.to_string()));
            }
            b')' => m.push(PickleValue::Tuple(Vec::new())),
            b't' => {
                let items = m.pop_mark()?;
                m.push(PickleValue::Tuple(items));
            }
            0x85..=0x87 => {
                let n = (op - 0x84) as usize;
                let mut items = (0..n).map(|_| m.pop()).collect::<std::result::Result<Vec<_>, _>>()?;
                items.reverse();
                m.push(PickleValue::Tuple(items));
            }
            b']' => m.push(PickleValue::list(Vec::new())),
            b'l' => {
                let items = m.pop_mark()?;
                m.push(PickleValue::list(items));
            }
            b'a' => {
                let v = m.pop()?;
                append_to(m.top()?, vec![v])?;
            }
            b'e' => {
                let items = m.pop_mark()?;
                append_to(m.top()?, items)?;
            }
            b'}' => m.push(PickleValue::dict(Vec::new())),
            b'd' => {
                let items = m.pop_mark()?;
                let d = PickleValue::dict(Vec::new());
                set_items(&d, items)?;
                m.push(d);
            }
            b's' => {
                let v = m.pop()?;
                let k = m.pop()?;
                set_items(m.top()?, vec![k, v])?;
            }
            b'u' => {
                let items = m.pop_mark()?;
                set_items(m.top()?, items)?;
            }
            0x8f => m.push(PickleValue::list(Vec::new())),
            0x90 => {
                let items = m.pop_mark()?;
                append_to(m.top()?, items)?;
            }
            0x91 => {
                let items = m.pop_mark()?;
                m.push(PickleValue::list(items));
            }
            b'0' => {
                m.stack.pop();
            }
            b'1' => {
                m.pop_mark()?;
            }
            b'2' => {
                let v = m.top()?.clone();
                m.push(v);
            }
            b'p' => {
                let k = r.line()?.trim().parse::<u64>().map_err(|e| e.to_string())?;
                m.memo_put(k)?;
            }
            b'q' => {
                let k = u64::from(r.byte()?);
                m.memo_put(k)?;
            }
            b'r' => {
                let k = u64::from(r.u32()?);
                m.memo_put(k)?;
            }
            0x94 => {
                let k = m.memo.len() as u64;
                m.memo_put(k)?;
            }
            b'g' => {
                let k = r.line()?.trim().parse::<u64>().map_err(|e| e.to_string())?;
                let v = m.memo_get(k)?;
                m.push(v);
            }
            b'h' => {
                let k = u64::from(r.byte()?);
                let v = m.memo_get(k)?;
                m.push(v);
            }
            b'j' => {
                let k = u64::from(r.u32()?);
                let v = m.memo_get(k)?;
                m.push(v);
            }
            b'c' => {
                let module = r.line()?.to_string();
                let name = r.line()?.to_string();
                m.push(PickleValue::Global(module, name));
            }
            0x93 => {
                let name = m.pop()?.as_text().ok_or("STACK_GLOBAL name is not a string")?;
                let module = m.pop()?.as_text().ok_or("STACK_GLOBAL module is not a string")?;
                m.push(PickleValue::Global(module, name));
            }
            b'R' => {
                let args = m.pop()?.items().ok_or("REDUCE arguments are not a tuple")?;
                let PickleValue::Global(module, name) = m.pop()? else {
                    return Err("REDUCE callable is not a global".into());
                };
                let v = call(&module, &name, args)?;
                m.push(v);
            }
            0x81 => {
                let args = m.pop()?.items().ok_or("NEWOBJ arguments are not a tuple")?;
                let PickleValue::Global(module, name) = m.pop()? else {
                    return Err("NEWOBJ class is not a global".into());
                };
                let v = call(&module, &name, args)?;
                m.push(v);
            }
            0x92 => {
                let _kwargs = m.pop()?;
                let args = m.pop()?.items().ok_or("NEWOBJ_EX arguments are not a tuple")?;
                let PickleValue::Global(module, name) = m.pop()? else {
                    return Err("NEWOBJ_EX class is not a global".into());
                };
                let v = call(&module, &name, args)?;
                m.push(v);
            }
            b'o' => {
                let mut items = m.pop_mark()?;
                if items.is_empty() {
                    return Err("OBJ without a class".into());
                }
                let PickleValue::Global(module, name) = items.remove(0) else {
                    return Err("OBJ class is not a global".into());
                };
                let v = call(&module, &name, items)?;
                m.push(v);
            }
            b'i' => {
                let module = r.line()?.to_string();
                let name = r.line()?.to_string();
                let items = m.pop_mark()?;
                let v = call(&module, &name, items)?;
                m.push(v);
            }
            b'b' => {
                let state = m.pop()?;
                match m.top()? {
                    PickleValue::Object(o) => o.borrow_mut().state = Some(state),
                    d @ PickleValue::Dict(_) => {
                        if let PickleValue::Dict(src) = &state {
                            let pairs: Vec<PickleValue> = src
                                .borrow()
                                .iter()
                                .flat_map(|(k, v)| [k.clone(), v.clone()])
                                .collect();
                            set_items(d, pairs)?;
                        }
                    }
                    _ => return Err("BUILD target is not an object".into()),
                }
            }
            other => return Err(format!("unsupported pickle opcode 0x{other:02x} at byte {}", r.pos - 1)),
        }
    }
}

/// A decoded numpy array, widened to f64, in C order.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Widens raw numpy data given a dtype string such as `<f4` or `i8`.
pub(crate) fn decode_numeric(descr: &str, raw: &[u8]) -> std::result::Result<Vec<f64>, String> {
    let (order, body) = match descr.chars().next() {
        Some(c @ ('<' | '>' | '|' | '=')) => (c, &descr[1..]),
        _ => ('<', descr),
    };
    if order == '>' {
        return Err(format!("big-endian dtype {descr} not supported"));
    }
    let kind = body.chars().next().ok_or("empty dtype")?;
    let size: usize = body[1..].parse().map_err(|_| format!("bad dtype {descr}"))?;
    if size == 0 || raw.len() % size != 0 {
        return Err(format!("{} bytes is not a whole number of {descr} items", raw.len()));
    }
    let chunks = raw.chunks_exact(size);
    let out = match (kind, size) {
        ('f', 4) => chunks.map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('f', 8) => chunks.map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        ('i', 1) => chunks.map(|c| c[0] as i8 as f64).collect(),
        ('i', 2) => chunks.map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('i', 4) => chunks.map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('i', 8) => chunks.map(|c| i64::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('u', 1) | ('b', 1) => chunks.map(|c| c[0] as f64).collect(),
        ('u', 2) => chunks.map(|c| u16::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('u', 4) => chunks.map(|c| u32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        ('u', 8) => chunks.map(|c| u64::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        _ => return Err(format!("unsupported dtype {descr}")),
    };
    Ok(out)
}

fn dtype_descr(v: &PickleValue) -> std::result::Result<String, String> {
    let PickleValue::Object(o) = v else {
        return Err("ndarray dtype is not an object".into());
    };
    let o = o.borrow();
    let base = o
        .args
        .first()
        .and_then(PickleValue::as_text)
        .ok_or("dtype without a type string")?;
    let order = o
        .state
        .as_ref()
        .and_then(PickleValue::items)
        .and_then(|s| s.get(1).and_then(PickleValue::as_text))
        .unwrap_or_else(|| "<".into());
    Ok(format!("{order}{base}"))
}

/// Decodes a pickled `numpy.ndarray`.
pub fn to_ndarray(v: &PickleValue) -> std::result::Result<NdArray, String> {
    let Some((module, name)) = v.class() else {
        return Err("expected a numpy array".into());
    };
    if !(module.starts_with("numpy") && name == "_reconstruct") {
        return Err(format!("expected a numpy array, found {module}.{name}"));
    }
    let PickleValue::Object(o) = v else { unreachable!() };
    let state = o
        .borrow()
        .state
        .as_ref()
        .and_then(PickleValue::items)
        .ok_or("numpy array without state")?;
    if state.len() < 5 {
        return Err("short numpy array state".into());
    }
    let shape = state[1]
        .items()
        .ok_or("numpy shape is not a tuple")?
        .iter()
        .map(|d| d.as_int().and_then(|i| usize::try_from(i).ok()))
        .collect::<Option<Vec<usize>>>()
        .ok_or("bad numpy shape")?;
    let descr = dtype_descr(&state[2])?;
    let fortran = matches!(state[3], PickleValue::Bool(true)) || state[3].as_int() == Some(1);
    let raw = state[4].as_raw_bytes().ok_or("numpy data is not a byte string")?;
    let mut values = decode_numeric(&descr, &raw)?;
    let count: usize = shape.iter().product();
    if values.len() != count {
        return Err(format!("numpy data has {} items, shape {shape:?}", values.len()));
    }
    if fortran && shape.len() == 2 {
        let (r, c) = (shape[0], shape[1]);
        let mut c_order = vec![0.0; values.len()];
        for i in 0..r {
            for j in 0..c {
                c_order[i * c + j] = values[j * r + i];
            }
        }
        values = c_order;
    }
    Ok(NdArray { shape, values })
}

/// Decodes a pickled `scipy.sparse.csr_matrix`, or a dense 2-d ndarray.
pub fn to_csr(v: &PickleValue) -> std::result::Result<CsrMatrix, String> {
    let Some((module, name)) = v.class() else {
        return Err("expected a sparse matrix or array".into());
    };
    if module.starts_with("numpy") {
        let a = to_ndarray(v)?;
        if a.shape.len() != 2 {
            return Err(format!("expected a 2-d array, got shape {:?}", a.shape));
        }
        let dense = crate::tensor::DenseMatrix::from_vec(a.shape[0], a.shape[1], a.values)
            .map_err(|e| e.to_string())?;
        return Ok(CsrMatrix::from_dense(&dense));
    }
    if !(module.starts_with("scipy.sparse") && name == "csr_matrix") {
        return Err(format!("expected scipy csr_matrix, found {module}.{name}"));
    }
    let PickleValue::Object(o) = v else { unreachable!() };
    let state = o.borrow().state.clone().ok_or("csr_matrix without state")?;
    let field = |k: &str| state.get(k).ok_or(format!("csr_matrix state lacks `{k}`"));
    let shape_v = state.get("_shape").or_else(|| state.get("shape")).ok_or("csr_matrix without shape")?;
    let shape = shape_v
        .items()
        .ok_or("csr shape is not a tuple")?
        .iter()
        .map(|d| d.as_int().and_then(|i| usize::try_from(i).ok()))
        .collect::<Option<Vec<usize>>>()
        .ok_or("bad csr shape")?;
    if shape.len() != 2 {
        return Err("csr shape must have two entries".into());
    }
    let as_usize = |a: NdArray| -> std::result::Result<Vec<usize>, String> {
        a.values
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(format!("bad index value {x}"))
                }
            })
            .collect()
    };
    let indptr = as_usize(to_ndarray(&field("indptr")?)?)?;
    let indices = as_usize(to_ndarray(&field("indices")?)?)?;
    let data = to_ndarray(&field("data")?)?.values;
    CsrMatrix::new(shape[0], shape[1], indptr, indices, data).map_err(|e| e.to_string())
}

/// Decodes a pickled `{node: [neighbors]}` dict (including defaultdicts).
pub fn to_adjacency_lists(v: &PickleValue) -> std::result::Result<Vec<(usize, Vec<usize>)>, String> {
    let PickleValue::Dict(d) = v else {
        return Err("expected a dict of neighbor lists".into());
    };
    let to_id = |x: &PickleValue| {
        x.as_int()
            .and_then(|i| usize::try_from(i).ok())
            .ok_or_else(|| format!("bad node id {x:?}"))
    };
    d.borrow()
        .iter()
        .map(|(k, vs)| {
            let nbrs = vs
                .items()
                .ok_or("neighbor entry is not a list")?
                .iter()
                .map(to_id)
                .collect::<std::result::Result<Vec<usize>, String>>()?;
            Ok((to_id(k)?, nbrs))
        })
        .collect()
}
