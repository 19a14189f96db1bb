use ed_core::grid::ConfigGrid;
use ed_core::quantum::states::{gaussian_packet, vortex};
use ed_core::quantum::WaveState;
use ed_core::system::ParticleSystem;
use ed_sim::snapshot::{decode, encode, read, slice_csv, write, MAGIC};
use ed_sim::SimError;

fn packet() -> WaveState {
    let grid = ConfigGrid::line(128, -6.0, 6.0, false).unwrap();
    let sys = ParticleSystem::new(vec![1.3], vec![0.5], 1).unwrap();
    gaussian_packet(&grid, &sys, &[0.4], &[0.9], &[1.7]).unwrap().with_time(0.25)
}

#[test]
fn round_trip_is_bit_exact() {
    let s = packet();
    let bytes = encode(&s, 17, "abc").unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    let (h, back) = decode(&bytes).unwrap();
    assert_eq!(h.step, 17);
    assert_eq!(h.config_hash, "abc");
    assert_eq!(h.time, 0.25);
    assert_eq!(back.grid(), s.grid());
    assert_eq!(back.system(), s.system());
    for (a, b) in back.psi().values().iter().zip(s.psi().values()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    assert_eq!(encode(&back, 17, "abc").unwrap(), bytes);
}

#[test]
fn round_trip_through_a_file_in_two_dimensions() {
    let grid = ConfigGrid::new(ed_core::grid::GridSpec {
        points: vec![24, 20],
        extent: vec![8.0, 6.0],
        origin: vec![-4.0, -3.0],
        periodic: vec![false, true],
    })
    .unwrap();
    let sys = ParticleSystem::new(vec![1.0], vec![0.0], 2).unwrap();
    let s = vortex(&grid, &sys, 2, &[0.0, 0.0], 1.0, 2.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.edsnap");
    write(&path, &s, 3, "h").unwrap();
    let (_, back) = read(&path).unwrap();
    assert_eq!(back.max_deviation(&s), 0.0);
}

#[test]
fn corrupt_input_is_rejected() {
    let bytes = encode(&packet(), 0, "x").unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode(&bad), Err(SimError::Snapshot(_))));
    assert!(matches!(decode(&bytes[..bytes.len() - 8]), Err(SimError::Snapshot(_))));
    assert!(decode(&bytes[..20]).is_err());
    assert!(decode(&[]).is_err());
}

#[test]
fn slice_matches_the_state() {
    let s = packet();
    let mut out = Vec::new();
    slice_csv(&s, 0, &[0], &mut out).unwrap();
    let mut r = csv::Reader::from_reader(out.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["x", "re", "im", "rho", "phase"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 128);
    for (i, row) in rows.iter().enumerate() {
        let z = s.psi().values()[i];
        let x: f64 = row[0].parse().unwrap();
        assert_eq!(x, s.grid().coordinate(0, i));
        assert_eq!(row[1].parse::<f64>().unwrap(), z.re);
        assert_eq!(row[3].parse::<f64>().unwrap(), z.norm_sqr());
    }
    assert!(slice_csv(&s, 1, &[0], Vec::new()).is_err());
    assert!(slice_csv(&s, 0, &[0, 0], Vec::new()).is_err());
}
