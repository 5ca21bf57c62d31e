use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_works_from_an_embedded_interpreter() {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(thinflow_py::thinflow_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("tf", m).unwrap();
        py.run(
            c"
import math
c = tf.Curve.ellipse(1.5, 1.0)
d = tf.ThinDomain(c, [-0.5], [0.5], 0.1)
assert d.validate()['passed']
g = tf.ThinGrid(d, 32, 6)
th = g.surface().thetas()
v = [[math.cos(t) for t in th]]
assert g.pairing_defect(g.extend(v), v) < 1e-12
slope = tf.fit_rate([(0.2, 0.2), (0.1, 0.1), (0.05, 0.05)])[0]
assert abs(slope - 1.0) < 1e-12
try:
    tf.solve_thin(g, g.extend(v), 1.0, -1e-3, 0.1)
    raise AssertionError('negative dt accepted')
except ValueError:
    pass
",
            Some(&globals),
            None,
        )
        .unwrap();
    });
}
