//! Binary envelope and field encoding shared by every artifact and
//! protocol message.
//!
//! Envelope: `b"MDRM"` ‖ version `u16` BE ‖ type tag `u16` BE ‖ body.
//! Body: zero or more fields, each `tag u16` ‖ `length u32` ‖ value, with
//! tags strictly ascending. Decoders are strict: unknown fields, tag-order
//! violations, length overruns, and trailing bytes are all rejected, which
//! keeps encode∘decode a bijection on the accepted set (canonical form).

use crate::error::WireError;

pub const MAGIC: [u8; 4] = *b"MDRM";
pub const WIRE_VERSION: u16 = 1;
pub const ENVELOPE_LEN: usize = 8;

/// Message type tags. Stable wire values.
pub mod tag {
    pub const KEYPAIR: u16 = 0x0001;
    pub const CERT_BODY: u16 = 0x0002;
    pub const CERTIFICATE: u16 = 0x0003;
    pub const MANIFEST: u16 = 0x0010;
    pub const SIGNED_MANIFEST: u16 = 0x0011;
    pub const INIT_DATA: u16 = 0x0012;
    pub const SEGMENT_RECORD: u16 = 0x0013;
    pub const SPC_BODY: u16 = 0x0020;
    pub const SPC: u16 = 0x0021;
    pub const CKC_PAYLOAD: u16 = 0x0030;
    pub const CKC: u16 = 0x0031;
    pub const LICENSE_POLICY: u16 = 0x0032;
    pub const KEY_REGISTRY: u16 = 0x0040;
    pub const SEALED_REGISTRY: u16 = 0x0041;
    pub const ERROR: u16 = 0x0050;
    pub const ATTESTATION_BODY: u16 = 0x0060;
    pub const ATTESTATION: u16 = 0x0061;
    pub const REPORT: u16 = 0x0070;
    pub const VERDICT: u16 = 0x0071;
    pub const EVIDENCE: u16 = 0x0072;
    pub const OFFLINE_RECORD: u16 = 0x0080;
    pub const OFFLINE_PAYLOAD: u16 = 0x0081;
    pub const SEALED_SEGMENT: u16 = 0x0090;
    pub const AD_BINDING: u16 = 0x0091;
    pub const LEASE_RENEW_REQ: u16 = 0x00A0;
    pub const LEASE_RENEW_RESP: u16 = 0x00A1;
    pub const LEASE_RELEASE_REQ: u16 = 0x00A2;
    pub const LEASE_RELEASE_RESP: u16 = 0x00A3;
    pub const LEASE_RENEW_BODY: u16 = 0x00A4;
    pub const LEASE_RELEASE_BODY: u16 = 0x00A5;
    pub const LEASE_RENEW_RESP_BODY: u16 = 0x00A6;
    pub const METERING_REPORT: u16 = 0x00B0;
}

/// Builds a message body. Field tags must be written in strictly
/// ascending order; violating that is an encoder bug and panics.
#[derive(Default)]
pub struct FieldWriter {
    buf: Vec<u8>,
    last_tag: Option<u16>,
}

impl FieldWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bytes(&mut self, tag: u16, value: &[u8]) {
        if let Some(last) = self.last_tag {
            assert!(tag > last, "field tags must be strictly ascending");
        }
        self.last_tag = Some(tag);
        self.buf.extend_from_slice(&tag.to_be_bytes());
        self.buf
            .extend_from_slice(&(u32::try_from(value.len()).expect("field too large")).to_be_bytes());
        self.buf.extend_from_slice(value);
    }

    pub fn put_u16(&mut self, tag: u16, v: u16) {
        self.put_bytes(tag, &v.to_be_bytes());
    }

    pub fn put_u32(&mut self, tag: u16, v: u32) {
        self.put_bytes(tag, &v.to_be_bytes());
    }

    pub fn put_u64(&mut self, tag: u16, v: u64) {
        self.put_bytes(tag, &v.to_be_bytes());
    }

    pub fn put_str(&mut self, tag: u16, v: &str) {
        self.put_bytes(tag, v.as_bytes());
    }

    /// List value: count u32 ‖ (len u32 ‖ item)*.
    pub fn put_list<I, T>(&mut self, tag: u16, items: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let items: Vec<T> = items.into_iter().collect();
        let mut v = Vec::new();
        v.extend_from_slice(&(u32::try_from(items.len()).expect("list too long")).to_be_bytes());
        for item in &items {
            let item = item.as_ref();
            v.extend_from_slice(&(item.len() as u32).to_be_bytes());
            v.extend_from_slice(item);
        }
        self.put_bytes(tag, &v);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Strict field reader over a message body. Fields are validated (bounds,
/// ascending tags) up front; consumers then pull expected tags in order.
pub struct BodyCursor<'a> {
    fields: Vec<(u16, &'a [u8])>,
    pos: usize,
}

impl<'a> BodyCursor<'a> {
    pub fn new(body: &'a [u8]) -> Result<Self, WireError> {
        let mut fields = Vec::new();
        let mut rest = body;
        let mut last_tag: Option<u16> = None;
        while !rest.is_empty() {
            if rest.len() < 6 {
                return Err(WireError::Truncated);
            }
            let tag = u16::from_be_bytes([rest[0], rest[1]]);
            let len = u32::from_be_bytes([rest[2], rest[3], rest[4], rest[5]]) as usize;
            rest = &rest[6..];
            if rest.len() < len {
                return Err(WireError::Truncated);
            }
            if let Some(last) = last_tag {
                if tag <= last {
                    return Err(WireError::TagOrder(tag));
                }
            }
            last_tag = Some(tag);
            fields.push((tag, &rest[..len]));
            rest = &rest[len..];
        }
        Ok(BodyCursor { fields, pos: 0 })
    }

    fn peek(&self) -> Option<(u16, &'a [u8])> {
        self.fields.get(self.pos).copied()
    }

    /// Next field must carry exactly this tag.
    pub fn require(&mut self, tag: u16) -> Result<&'a [u8], WireError> {
        match self.peek() {
            Some((t, v)) if t == tag => {
                self.pos += 1;
                Ok(v)
            }
            Some((t, _)) if t > tag => Err(WireError::MissingField(tag)),
            Some((t, _)) => Err(WireError::UnexpectedField(t)),
            None => Err(WireError::MissingField(tag)),
        }
    }

    /// Consume the field if present; absence is not an error.
    pub fn optional(&mut self, tag: u16) -> Result<Option<&'a [u8]>, WireError> {
        match self.peek() {
            Some((t, v)) if t == tag => {
                self.pos += 1;
                Ok(Some(v))
            }
            Some((t, _)) if t < tag => Err(WireError::UnexpectedField(t)),
            _ => Ok(None),
        }
    }

    /// All fields must have been consumed.
    pub fn done(self) -> Result<(), WireError> {
        match self.fields.get(self.pos) {
            Some((t, _)) => Err(WireError::UnexpectedField(*t)),
            None => Ok(()),
        }
    }
}

pub fn read_u16(tag: u16, v: &[u8]) -> Result<u16, WireError> {
    let arr: [u8; 2] = v.try_into().map_err(|_| WireError::FieldLength {
        tag,
        want: 2,
        got: v.len(),
    })?;
    Ok(u16::from_be_bytes(arr))
}

pub fn read_u32(tag: u16, v: &[u8]) -> Result<u32, WireError> {
    let arr: [u8; 4] = v.try_into().map_err(|_| WireError::FieldLength {
        tag,
        want: 4,
        got: v.len(),
    })?;
    Ok(u32::from_be_bytes(arr))
}

pub fn read_u64(tag: u16, v: &[u8]) -> Result<u64, WireError> {
    let arr: [u8; 8] = v.try_into().map_err(|_| WireError::FieldLength {
        tag,
        want: 8,
        got: v.len(),
    })?;
    Ok(u64::from_be_bytes(arr))
}

pub fn read_array<const N: usize>(tag: u16, v: &[u8]) -> Result<[u8; N], WireError> {
    v.try_into().map_err(|_| WireError::FieldLength {
        tag,
        want: N,
        got: v.len(),
    })
}

pub fn read_str(tag: u16, v: &[u8]) -> Result<String, WireError> {
    String::from_utf8(v.to_vec()).map_err(|_| WireError::BadValue(tag, "invalid utf-8"))
}

pub fn read_list(tag: u16, v: &[u8]) -> Result<Vec<&[u8]>, WireError> {
    if v.len() < 4 {
        return Err(WireError::BadValue(tag, "list header truncated"));
    }
    let count = u32::from_be_bytes([v[0], v[1], v[2], v[3]]) as usize;
    let mut rest = &v[4..];
    let mut items = Vec::new();
    for _ in 0..count {
        if rest.len() < 4 {
            return Err(WireError::BadValue(tag, "list item header truncated"));
        }
        let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(WireError::BadValue(tag, "list item truncated"));
        }
        items.push(&rest[..len]);
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(WireError::BadValue(tag, "trailing bytes in list"));
    }
    Ok(items)
}

/// Wraps a body in the message envelope.
pub fn encode_envelope(type_tag: u16, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ENVELOPE_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&WIRE_VERSION.to_be_bytes());
    out.extend_from_slice(&type_tag.to_be_bytes());
    out.extend_from_slice(body);
    out
}

/// Validates the envelope and returns (type tag, body).
pub fn decode_envelope(bytes: &[u8]) -> Result<(u16, &[u8]), WireError> {
    if bytes.len() < ENVELOPE_LEN {
        return Err(WireError::Truncated);
    }
    if bytes[..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if version != WIRE_VERSION {
        return Err(WireError::BadVersion(version));
    }
    let type_tag = u16::from_be_bytes([bytes[6], bytes[7]]);
    Ok((type_tag, &bytes[ENVELOPE_LEN..]))
}

/// A type with a canonical wire representation.
pub trait WireMessage: Sized {
    const TYPE_TAG: u16;

    fn write_body(&self, w: &mut FieldWriter);
    fn read_body(c: &mut BodyCursor) -> Result<Self, WireError>;

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new();
        self.write_body(&mut w);
        w.finish()
    }

    fn encode(&self) -> Vec<u8> {
        encode_envelope(Self::TYPE_TAG, &self.body_bytes())
    }

    fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (type_tag, body) = decode_envelope(bytes)?;
        if type_tag != Self::TYPE_TAG {
            return Err(WireError::WrongType {
                want: Self::TYPE_TAG,
                got: type_tag,
            });
        }
        let mut c = BodyCursor::new(body)?;
        let msg = Self::read_body(&mut c)?;
        c.done()?;
        Ok(msg)
    }
}
