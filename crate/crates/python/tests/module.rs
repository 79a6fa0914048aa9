use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: for<'py> FnOnce(Python<'py>, &Bound<'py, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "censrank_py").unwrap();
        censrank_py::censrank_py(&m).unwrap();
        f(py, &m);
    });
}

#[test]
fn c_index_matches_hand_count() {
    with_module(|_, m| {
        let c: f64 = m
            .getattr("c_index")
            .unwrap()
            .call1((vec![1.0, 2.0, 3.0], vec![true, true, false], vec![0.1, 0.3, 0.2]))
            .unwrap()
            .extract()
            .unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-12);
    });
}

#[test]
fn kaplan_meier_returns_lists() {
    with_module(|_, m| {
        let out = m
            .getattr("kaplan_meier")
            .unwrap()
            .call1((vec![1.0, 2.0, 2.0, 4.0], vec![true, false, true, true]))
            .unwrap();
        let d = out.cast::<PyDict>().unwrap();
        let s: Vec<f64> = d.get_item("survival").unwrap().unwrap().extract().unwrap();
        let edges: Vec<f64> = d.get_item("bin_left_edge").unwrap().unwrap().extract().unwrap();
        assert_eq!(s.len(), edges.len());
        let at_one = edges.iter().position(|&e| e == 1.0).unwrap();
        assert!((s[at_one] - 0.75).abs() < 1e-12);
        assert_eq!(*s.last().unwrap(), 0.0);
    });
}

#[test]
fn bad_input_raises_value_error() {
    with_module(|py, m| {
        let err = m
            .getattr("c_index")
            .unwrap()
            .call1((vec![1.0, 2.0], vec![false, false], vec![0.0, 1.0]))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn model_trains_and_predicts() {
    with_module(|_, m| {
        let (x, t, e): (Vec<Vec<f64>>, Vec<f64>, Vec<bool>) = m
            .getattr("generate_synthetic")
            .unwrap()
            .call1((300usize, 4usize))
            .unwrap()
            .extract()
            .unwrap();
        let kwargs = PyDict::new(m.py());
        kwargs.set_item("loss", "rank-sigmoid").unwrap();
        kwargs.set_item("max_epochs", 3usize).unwrap();
        kwargs.set_item("bin_width", 30.0).unwrap();
        let model = m
            .getattr("Model")
            .unwrap()
            .call_method(
                "train",
                (x[..200].to_vec(), t[..200].to_vec(), e[..200].to_vec(), x[200..].to_vec(), t[200..].to_vec(), e[200..].to_vec()),
                Some(&kwargs),
            )
            .unwrap();
        let scores: Vec<f64> = model.call_method1("predict", (x[..10].to_vec(),)).unwrap().extract().unwrap();
        assert_eq!(scores.len(), 10);
        assert!(scores.iter().all(|s| s.is_finite()));
    });
}
