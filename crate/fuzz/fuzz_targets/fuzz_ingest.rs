#![no_main]

use libfuzzer_sys::fuzz_target;
use sivc::io::{read_frame, read_table, ColumnRoles, ScaleMode};
use sivc::OutcomeKind;

fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else { return };
    let delimiter = [b',', b'\t', b';', b' '][usize::from(first % 4)];
    let roles = ColumnRoles {
        outcome: "time".into(),
        event: Some("status".into()),
        x: vec!["x1".into(), "x2".into()],
        u: vec!["u1".into(), "u2".into()],
        z: vec!["u1".into(), "u2".into(), "z1".into()],
    };
    let kind = if first & 0x10 == 0 { OutcomeKind::Gaussian } else { OutcomeKind::Cox };
    let mode = if first & 0x20 == 0 { ScaleMode::Estimate } else { ScaleMode::Identity };
    if let Ok(frame) = read_frame(rest, delimiter, &roles, kind, mode, true) {
        let _ = frame.dataset(&roles);
    }
    let _ = read_table(rest, delimiter, &["x1".into(), "time".into()]);
});
