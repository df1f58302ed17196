#![no_main]

use libfuzzer_sys::fuzz_target;
use maxwell_hp::mesh::Mesh;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mesh) = Mesh::from_dump(text) {
        let again = Mesh::from_dump(&mesh.to_dump()).expect("a dump of a parsed mesh parses");
        assert_eq!(again, mesh);
    }
});
