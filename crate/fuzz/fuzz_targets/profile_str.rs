#![no_main]

use gameng::io::{format_profile, parse_profile, read_game};
use libfuzzer_sys::fuzz_target;

const GAME: &str = r#"{
  "players": [
    {"name": "P1", "strategies": ["C", "D"]},
    {"name": "P2", "strategies": ["left", "mid", "right"]},
    {"name": "P3", "strategies": ["x", "y"]}
  ],
  "payoffs": [
    [[[1, 2, 3], [4, 5, 6]], [[0, 0, 0], [1, 1, 1]], [[2, 2, 2], [3, 3, 3]]],
    [[[6, 5, 4], [3, 2, 1]], [[1, 0, 1], [0, 1, 0]], [[9, 9, 9], [8, 8, 8]]]
  ]
}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let game = read_game(GAME).unwrap();
    for by_index in [false, true] {
        if let Ok(profile) = parse_profile(&game, text, by_index) {
            let shown = format_profile(&game, &profile, by_index);
            assert_eq!(parse_profile(&game, &shown, by_index).unwrap(), profile);
        }
    }
});
