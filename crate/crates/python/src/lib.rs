use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use effect_handlers::effects::analyze_program;
use effect_handlers::elaborate::elaborate_program;
use effect_handlers::engine::run_collect;
use effect_handlers::optimize::{optimize, OptimizeOptions};
use effect_handlers::pipeline::{compile, OptLevel};
use effect_handlers::{parse, parse_query, print_program, SourceProgram};

fn level(s: &str) -> PyResult<OptLevel> {
    s.parse().map_err(PyValueError::new_err)
}

/// A parsed program.
#[pyclass(frozen)]
struct Program {
    inner: SourceProgram,
}

#[pymethods]
impl Program {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = parse(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Program { inner })
    }

    /// Program text at `stage`: source, elaborated, effects, rewritten or optimized.
    fn emit(&self, stage: &str) -> PyResult<String> {
        let opts = OptimizeOptions::default();
        Ok(match stage {
            "source" => print_program(&self.inner),
            "elaborated" => print_program(&elaborate_program(&self.inner).program),
            "effects" => analyze_program(&self.inner).render(),
            "rewritten" => print_program(&optimize(&self.inner, false, &opts).program),
            "optimized" => print_program(&optimize(&self.inner, true, &opts).program),
            other => return Err(PyValueError::new_err(format!("unknown stage `{other}`"))),
        })
    }

    /// Inferred effects of `name/arity` as a printed set.
    fn effects_of(&self, name: &str, arity: usize) -> String {
        let env = analyze_program(&self.inner);
        env.of(effect_handlers::Functor::new(name, arity)).to_string()
    }

    /// Runs `query`; returns the printed answers and captured output.
    #[pyo3(signature = (query, opt="none", max_answers=20, max_steps=None))]
    fn run(&self, query: &str, opt: &str, max_answers: usize, max_steps: Option<u64>) -> PyResult<(Vec<String>, String)> {
        let q = parse_query(query).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let compiled = compile(&self.inner, &q, level(opt)?);
        let r = run_collect(&compiled.db, &compiled.goal, max_answers, max_steps);
        if let Some(e) = r.error {
            return Err(PyRuntimeError::new_err(e.to_string()));
        }
        let answers = r.answers.iter().map(|a| compiled.format_answer(a)).collect();
        Ok((answers, r.output))
    }

    /// Toplevel transcript of `query`.
    #[pyo3(signature = (query, opt="none", max_answers=20))]
    fn transcript(&self, query: &str, opt: &str, max_answers: usize) -> PyResult<String> {
        let q = parse_query(query).map_err(|e| PyValueError::new_err(e.to_string()))?;
        compile(&self.inner, &q, level(opt)?)
            .transcript(max_answers, None)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Program({} clauses)", self.inner.clauses.len())
    }
}

#[pymodule]
fn effect_handlers_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    Ok(())
}
