use megacon::ingest::tle::{emit_tle, parse_tle};

const ISS: &str = "ISS (ZARYA)
1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927
2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537
";

fn main() {
    let rec = parse_tle(ISS).expect("valid element set");
    println!("catalog {} ({}), epoch {}", rec.norad_id, rec.intl_designator, rec.epoch());
    println!(
        "i = {} deg, e = {}, n = {} rev/day, B* = {:e}",
        rec.inclination_deg, rec.eccentricity, rec.mean_motion_rev_day, rec.bstar
    );

    let (l1, l2) = emit_tle(&rec).expect("representable");
    println!("{l1}\n{l2}");

    let mut broken = l2.clone();
    broken.replace_range(10..11, "7");
    match parse_tle(&format!("{l1}\n{broken}")) {
        Ok(_) => println!("corruption slipped through"),
        Err(e) => println!("corrupted line rejected: {e}"),
    }
}
