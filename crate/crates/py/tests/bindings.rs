//! The extension module loads in an embedded interpreter and its functions
//! agree with the core crate.

use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_round_trip() {
    use ssl_lab_py::ssl_lab_py as module;
    pyo3::append_to_inittab!(module);
    Python::initialize();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        locals.set_item("m", py.import("ssl_lab_py").unwrap()).unwrap();
        let code = c"
data = m.two_moons(200, 0.1, 3)
p = m.ParameterSet([2, 5, 2], 1)
ok = (
    m.hoeffding_n(0.95, 0.01) == 18445
    and len(data) == 200
    and m.ParameterSet.from_json(p.to_json()).predict(data.points) == p.predict(data.points)
    and len(m.methods()) == 7
)
";
        py.run(code, None, Some(&locals)).unwrap();
        let ok: bool = locals.get_item("ok").unwrap().unwrap().extract().unwrap();
        assert!(ok);

        let data = ssl_lab::datasets::two_moons(200, 0.1, 3).unwrap();
        let labels: Vec<usize> = locals.get_item("data").unwrap().unwrap().getattr("labels").unwrap().extract().unwrap();
        assert_eq!(labels, data.labels());
    });
}
