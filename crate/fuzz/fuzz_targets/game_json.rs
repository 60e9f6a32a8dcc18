#![no_main]

use gameng::io::{read_game, write_game};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(game) = read_game(text) {
        let again = read_game(&write_game(&game)).expect("written game reads back");
        assert_eq!(again, game);
        let _ = game.enumerate_pure_nash();
    }
});
