//! Write and read the MDET tensor format.

use std::io::Cursor;

use medet::tensor_io::{read_tensor, write_tensor, Tensor};

fn main() -> medet::Result<()> {
    let smallest = Tensor::new(vec![1], vec![0.0])?;
    let mut buf = Vec::new();
    let n = write_tensor(&smallest, &mut buf)?;
    println!("shape {:?} -> {n} bytes", smallest.shape());

    let t = Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-7, 42.0])?;
    buf.clear();
    write_tensor(&t, &mut buf)?;
    let back = read_tensor(&mut Cursor::new(&buf))?;
    assert_eq!(back, t);
    println!(
        "shape {:?} -> {} bytes, read back row 1 = {:?}",
        t.shape(),
        buf.len(),
        back.row(1)
    );

    buf[..4].copy_from_slice(b"XXXX");
    match read_tensor(&mut Cursor::new(&buf)) {
        Err(e) => println!("corrupted header: {e}"),
        Ok(_) => unreachable!(),
    }
    buf.truncate(buf.len() - 3);
    buf[..4].copy_from_slice(b"MDET");
    if let Err(e) = read_tensor(&mut Cursor::new(&buf)) {
        println!("truncated payload: {e}");
    }
    Ok(())
}
