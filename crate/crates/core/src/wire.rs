//! Big-endian length-prefixed field helpers shared by the store file and the
//! protocol frames.

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

pub(crate) type ReadResult<T> = Result<T, &'static str>;

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> ReadResult<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or("length overflow")?;
        let out = self.data.get(self.pos..end).ok_or("truncated")?;
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> ReadResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> ReadResult<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> ReadResult<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> ReadResult<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn bytes16(&mut self) -> ReadResult<&'a [u8]> {
        let n = self.u16()? as usize;
        self.take(n)
    }

    pub fn bytes32(&mut self) -> ReadResult<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn finish(&self) -> ReadResult<()> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err("trailing bytes")
        }
    }
}

pub(crate) fn put_bytes16(out: &mut Vec<u8>, field: &[u8]) {
    let len = u16::try_from(field.len()).expect("field length checked by caller");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(field);
}

pub(crate) fn put_bytes32(out: &mut Vec<u8>, field: &[u8]) {
    let len = u32::try_from(field.len()).expect("field length checked by caller");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(field);
}
