//! Baselines (under construction).
