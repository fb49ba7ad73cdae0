#![no_main]

use libfuzzer_sys::fuzz_target;
use micv::io::{read_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(dataset) = read_csv(data, "NA", "y") {
        let mut buf = Vec::new();
        write_csv(&dataset, &mut buf, "NA").expect("write parsed dataset");
        let back = read_csv(buf.as_slice(), "NA", "y").expect("reparse written dataset");
        assert_eq!(back, dataset);
    }
});
