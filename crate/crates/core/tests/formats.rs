use std::fs;

use proptest::prelude::*;
use tissuesim::io::{
    read_instance_map, read_label_mask, read_multiplex, sidecar_path, write_instance_map,
    write_label_mask, write_multiplex, MultiplexSidecar,
};
use tissuesim::{Error, Grid, MultiplexImage};

#[test]
fn two_by_two_mask_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    let g = Grid::from_rows(vec![vec![1u16, 1], vec![2, 1]]);
    write_label_mask(&g, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5"));
    assert_eq!(&bytes[bytes.len() - 4..], &[1, 1, 2, 1]);
    assert_eq!(read_label_mask(&path).unwrap(), g);
}

#[test]
fn instance_300_is_two_bytes_big_endian() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.pgm");
    write_instance_map(&Grid::from_rows(vec![vec![300u32, 0]]), &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes, b"P5\n2 1\n65535\n\x01\x2c\x00\x00");
}

#[test]
fn oversized_label_refused() {
    let dir = tempfile::tempdir().unwrap();
    let err = write_label_mask(
        &Grid::from_rows(vec![vec![256u16]]),
        &dir.path().join("m.pgm"),
    )
    .unwrap_err();
    assert!(matches!(err, Error::LabelOverflow { label: 256, .. }));
}

#[test]
fn single_voxel_volume() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.f32");
    let mut img = MultiplexImage::zeros(1, 1, 1);
    img.data[0] = 1.0;
    let side = write_multiplex(&img, &path).unwrap();
    assert_eq!(side, sidecar_path(&path));
    assert_eq!(fs::read(&path).unwrap(), [0x00, 0x00, 0x80, 0x3f]);
    let meta: MultiplexSidecar = serde_json::from_slice(&fs::read(&side).unwrap()).unwrap();
    assert_eq!((meta.channels, meta.height, meta.width), (1, 1, 1));
    assert_eq!(meta.channel_order, vec![1]);
}

#[test]
fn truncated_volume_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.f32");
    write_multiplex(&MultiplexImage::zeros(2, 3, 3), &path).unwrap();
    fs::write(&path, [0u8; 8]).unwrap();
    assert!(matches!(read_multiplex(&path), Err(Error::Format { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn label_mask_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let data: Vec<u16> = (0..w * h).map(|i| ((seed >> (i % 56)) as u16 ^ i as u16) & 0xff).collect();
        let g = Grid::from_vec(w, h, data);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        write_label_mask(&g, &path).unwrap();
        prop_assert_eq!(fs::metadata(&path).unwrap().len() as usize, format!("P5\n{w} {h}\n255\n").len() + w * h);
        prop_assert_eq!(read_label_mask(&path).unwrap(), g);
    }

    #[test]
    fn instance_map_round_trip(ids in prop::collection::vec(0u32..=65535, 1..200)) {
        let g = Grid::from_vec(ids.len(), 1, ids);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.pgm");
        write_instance_map(&g, &path).unwrap();
        prop_assert_eq!(read_instance_map(&path).unwrap(), g);
    }

    #[test]
    fn volume_round_trip_is_bitwise(c in 1usize..4, h in 1usize..6, w in 1usize..6,
                                    vals in prop::collection::vec(any::<f32>(), 100)) {
        let mut img = MultiplexImage::zeros(c, h, w);
        for (v, &s) in img.data.iter_mut().zip(vals.iter().cycle()) {
            *v = s as f64;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.f32");
        write_multiplex(&img, &path).unwrap();
        prop_assert_eq!(fs::metadata(&path).unwrap().len() as usize, 4 * c * h * w);
        let back = read_multiplex(&path).unwrap();
        let bits = |m: &MultiplexImage| m.data.iter().map(|v| (*v as f32).to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&img));
        prop_assert_eq!(back.channels, c);
    }
}
