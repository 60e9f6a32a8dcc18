#![no_main]

use gameng::io::{read_game, read_spec, write_spec};
use libfuzzer_sys::fuzz_target;

const GAME: &str = r#"{
  "players": [
    {"name": "P1", "strategies": ["C", "D"]},
    {"name": "P2", "strategies": ["left", "mid", "right"]}
  ],
  "payoffs": [
    [[-1, -1], [-4, 0], [2, 1]],
    [[0, -4], [-3, -3], [1, 2]]
  ]
}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let game = read_game(GAME).unwrap();
    for by_index in [false, true] {
        if let Ok(spec) = read_spec(text, &game, by_index) {
            let again = read_spec(&write_spec(&spec, &game), &game, false).expect("written spec reads back");
            assert_eq!(again.desired, spec.desired);
            assert_eq!(again.undesired, spec.undesired);
            let _ = spec.validate(&game, false);
        }
    }
});
