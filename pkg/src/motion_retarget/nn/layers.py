"""Dense building blocks."""
import math

import torch
from torch import nn


def init_linear(lin: nn.Linear, zero=False):
    """Uniform(+-1/sqrt(fan_in)) for weight and bias, or all zeros."""
    with torch.no_grad():
        if zero:
            lin.weight.zero_()
            if lin.bias is not None:
                lin.bias.zero_()
            return lin
        bound = 1.0 / math.sqrt(lin.in_features)
        lin.weight.uniform_(-bound, bound)
        if lin.bias is not None:
            lin.bias.uniform_(-bound, bound)
    return lin


class MLP(nn.Module):
    """Two-layer perceptron with a GELU in between."""

    def __init__(self, d_in, d_hidden, d_out, zero_last=False):
        super().__init__()
        self.fc1 = init_linear(nn.Linear(d_in, d_hidden))
        self.fc2 = init_linear(nn.Linear(d_hidden, d_out), zero=zero_last)
        self.act = nn.GELU()

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class FeedForward(nn.Module):
    def __init__(self, d_model, mult=4, dropout=0.0):
        super().__init__()
        self.fc1 = init_linear(nn.Linear(d_model, d_model * mult))
        self.fc2 = init_linear(nn.Linear(d_model * mult, d_model))
        self.act = nn.GELU()
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.fc2(self.dropout(self.act(self.fc1(x))))
