"""Peer-loss learning with noisy labels: noise models, losses, data and exact checks."""

from ._peerloss import (
    BaseLoss,
    Classifier,
    Dataset,
    NoiseModel,
    PeerlossError,
    PeerPairing,
    alpha_star,
    calibration_condition_holds,
    delta_matrix,
    dispatch,
    draw_pairing,
    equalize_prior,
    eval_base,
    flip_labels,
    gen_circles,
    gen_twonorm,
    init_classifier,
    load_csv,
    make_noise_model,
    noisy_prior,
    peer_loss_batch,
    risk_bound,
    run_suite,
    sign_matrix,
    split,
    surrogate_loss,
    uniform_transition,
    write_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
