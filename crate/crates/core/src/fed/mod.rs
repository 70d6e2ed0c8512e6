//! Federated round engine (under construction).
