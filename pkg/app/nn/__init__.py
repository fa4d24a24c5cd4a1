"""From-scratch neural networks: autodiff, layers, models and training."""
