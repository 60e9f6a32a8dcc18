#![no_main]

use gameng::io::{read_game, read_solution_file, write_solution_file};
use libfuzzer_sys::fuzz_target;

const GAME: &str = r#"{
  "players": [
    {"name": "P1", "strategies": ["C", "D"]},
    {"name": "P2", "strategies": ["C", "D"]}
  ],
  "payoffs": [
    [[-1, -1], [-4, 0]],
    [[0, -4], [-3, -3]]
  ]
}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = read_solution_file(text) else { return };
    let _ = read_solution_file(&write_solution_file(&file)).expect("written file reads back");
    let game = read_game(GAME).unwrap();
    for record in &file.solutions {
        if let Ok(set) = record.perturbation_set(&game) {
            let _ = game.apply_perturbations(&set);
        }
    }
});
