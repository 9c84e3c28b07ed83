#pragma once

namespace cbpfa {

double digamma(double x);

// log(1 + exp(x)) without overflow.
double log1p_exp(double x);

}  // namespace cbpfa
