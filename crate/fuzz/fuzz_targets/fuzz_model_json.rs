#![no_main]

use libfuzzer_sys::fuzz_target;
use ndarray::Array2;
use sivc::io::SavedModel;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(model) = SavedModel::from_json_str(s) else { return };
    // a validated model predicts on inputs of its own shape
    let c = &model.coef;
    let x = Array2::from_elem((3, c.gamma.len() - 1), 0.5);
    let u = Array2::from_elem((3, c.beta.len()), -0.25);
    let z = Array2::from_elem((3, c.psi.len()), 1.0);
    model.predict(x.view(), u.view(), z.view()).expect("shapes match");
});
