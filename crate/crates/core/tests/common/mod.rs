pub mod reference;
pub mod linkpred;
