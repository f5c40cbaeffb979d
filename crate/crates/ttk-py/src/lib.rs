use pyo3::prelude::*;

#[pymodule]
fn ttk(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
