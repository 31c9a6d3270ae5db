mod common;

use proptest::prelude::*;
use proto3d::math::rng_for;
use proto3d::scene::{parse_program, serialize_program, validate, ParseError};
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialized_programs_parse_back_identically(p in common::program()) {
        let text = serialize_program(&p);
        let back = parse_program(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(serialize_program(&back), text);
        prop_assert!(validate(&back).is_empty());
    }
}

#[test]
fn fuzzed_inputs_never_panic_and_errors_are_positioned() {
    let seeds = common::fuzz_seeds();
    let mut rng = rng_for(0xF022, 0);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..10_000 {
        let input = common::mutate(&seeds[i % seeds.len()], &mut rng);
        if common::check_parse_outcome(&input) {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    assert!(rejected > 5_000 && accepted > 0, "accepted {accepted}, rejected {rejected}");
}

#[test]
fn arbitrary_bytes_are_handled() {
    let mut rng = rng_for(0xF022, 1);
    for _ in 0..2_000 {
        let len = rng.random_range(0..64);
        let raw: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let text = String::from_utf8_lossy(&raw).into_owned();
        if let Err(e) = parse_program(&text) {
            assert!(e.position().0 >= 1);
        }
    }
}

#[test]
fn error_positions_point_at_the_offending_token() {
    let err = parse_program("part \"A\" { sphere 1 pos [0,0,0] rot [0,0,0] }\npart \"B\" { sphere -1 pos [0,0,0] rot [0,0,0] }")
        .unwrap_err();
    assert!(matches!(err, ParseError::NonPositiveDimension { line: 2, .. }), "{err:?}");
    let err = parse_program("part \"A\" { sphere 1 pos [0,0,0] rot [0,0,0] }\npart \"A\" { sphere 1 pos [0,0,0] rot [0,0,0] }")
        .unwrap_err();
    assert!(matches!(err, ParseError::DuplicateLabel { line: 2, .. }), "{err:?}");
    let err = parse_program("part \"A\" { sphere 1 pos [0,0] rot [0,0,0] }").unwrap_err();
    assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err:?}");
    assert!(matches!(parse_program("").unwrap_err(), ParseError::Syntax { line: 1, .. }));
}
