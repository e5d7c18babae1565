//! Formal tensor algebra on `X x X` and numeric probes of cyclic subspaces.

mod identities;
mod numeric;
mod poly;
mod tensor;

pub use identities::{
    lemma_g, truncated_resolvent, verify_lemma_identity, verify_up_expansion, verify_w_relation, w_vector,
    LemmaCheck, UpExpansion, WRelation,
};
pub use numeric::{cyclic_residual, tensor_inner, CyclicOp, CyclicResidual, TensorPairing, Warning};
pub use poly::{apply_poly, OperatorPoly, Poly};
pub use tensor::{apply_r, apply_r_inverse, BaseId, BaseRegistry, FormalTensor, Sym};
