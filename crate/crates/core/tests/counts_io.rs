use rfiqkd::channel::{expected_counts, ChannelParams, IntensityLabel, SourceParams};
use rfiqkd::finite_key::{CountsError, CountsSet};
use rfiqkd::linalg::Axis;
use rfiqkd::rfi::ProtocolVariant;

const HEADER: &str = "basis_prepared,basis_measured,intensity_label,n,m\n";

fn parse(body: &str) -> Result<CountsSet, CountsError> {
    CountsSet::read_csv(format!("{HEADER}{body}").as_bytes())
}

#[test]
fn write_then_read_is_lossless() {
    let source = SourceParams::for_variant(ProtocolVariant::FourState, 0.8, 0.5, 0.3, 0.5, 0.2, 1e10);
    let counts = expected_counts(ProtocolVariant::FourState, &ChannelParams::default().at_distance(20.0), &source).unwrap();
    let mut buf = Vec::new();
    counts.write_csv(&mut buf).unwrap();
    let back = CountsSet::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, counts);
    assert_eq!(back.len(), 9);
}

#[test]
fn comments_whitespace_and_missing_cells() {
    let set = parse("# measured block 7\n Z , Z , mu , 100 , 3 \nX,Y,nu,50,20\n").unwrap();
    let zz = set.get(Axis::Z, Axis::Z).unwrap();
    assert_eq!(zz.n_at(IntensityLabel::Mu), 100.0);
    assert_eq!(zz.n_at(IntensityLabel::Omega), 0.0);
    assert_eq!(set.get_or_empty(Axis::Y, Axis::Y).n_total(), 0.0);
}

#[test]
fn row_level_diagnostics() {
    let err = parse("Z,Z,mu,100,3\nZ,Z,nu,10,11\n").unwrap_err();
    assert!(matches!(err, CountsError::Row { line: 3, .. }), "{err}");
    assert!(err.to_string().contains("exceeds"));

    let err = parse("Z,Z,mu,-1,0\n").unwrap_err();
    assert!(err.to_string().contains("negative"), "{err}");

    let err = parse("Z,Z,mu,5,1\nZ,Z,mu,5,1\n").unwrap_err();
    assert!(err.to_string().contains("duplicate"), "{err}");

    let err = parse("Z,W,mu,5,1\n").unwrap_err();
    assert!(err.to_string().contains("basis_measured"), "{err}");

    let err = parse("Z,Z,strong,5,1\n").unwrap_err();
    assert!(matches!(err, CountsError::Row { line: 2, .. }), "{err}");

    let err = parse("Z,Z,mu,five,1\n").unwrap_err();
    assert!(matches!(err, CountsError::Row { .. }), "{err}");
}

#[test]
fn missing_column_is_named() {
    let err = CountsSet::read_csv("basis_prepared,basis_measured,n,m\nZ,Z,1,0\n".as_bytes()).unwrap_err();
    assert!(matches!(err, CountsError::MissingColumn("intensity_label")), "{err}");
}
