#pragma once

namespace ntklab {

// log(1 + exp(-z)), evaluated stably at both tails. Positive for every finite
// z; decreasing; loss(0) = log 2.
double logistic_loss(double z);

// d/dz log(1 + exp(-z)) = -1 / (1 + exp(z)), always in (-1, 0).
// |grad| <= loss and |grad| <= sqrt(loss / 2) hold pointwise.
double logistic_loss_grad(double z);

}  // namespace ntklab
