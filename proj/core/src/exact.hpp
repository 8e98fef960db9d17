// Copyright 2026 The Marrow Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MARROW_SRC_EXACT_HPP_
#define MARROW_SRC_EXACT_HPP_

// Exact rational helpers for quantities that must round only once.

#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

namespace marrow::detail {

using BigInt = boost::multiprecision::cpp_int;

struct Fraction {
  BigInt num = 0;
  BigInt den = 1;  // always positive
};

/// The exact value of a finite double.
inline Fraction exact(double v) {
  if (v == 0.0) return {};
  int e = 0;
  const double m = std::frexp(v, &e);
  BigInt num(static_cast<long long>(std::ldexp(m, 53)));
  e -= 53;
  if (e >= 0) return {num << e, 1};
  return {num, BigInt(1) << -e};
}

inline void reduce(Fraction& f) {
  const BigInt g = boost::multiprecision::gcd(f.num, f.den);
  if (g > 1) {
    f.num /= g;
    f.den /= g;
  }
}

inline Fraction add(const Fraction& a, const Fraction& b) {
  Fraction r{a.num * b.den + b.num * a.den, a.den * b.den};
  reduce(r);
  return r;
}

inline Fraction sub(const Fraction& a, const Fraction& b) {
  Fraction r{a.num * b.den - b.num * a.den, a.den * b.den};
  reduce(r);
  return r;
}

/// num / den rounded to the nearest double, ties to even. Requires den > 0.
inline double rounded_quotient(const BigInt& num, const BigInt& den) {
  if (num == 0) return 0.0;
  if (num < 0) return -rounded_quotient(-num, den);
  namespace mp = boost::multiprecision;
  const long shift = 55 - (static_cast<long>(mp::msb(num)) - static_cast<long>(mp::msb(den)));
  const BigInt scaled = shift >= 0 ? BigInt(num << shift) : BigInt(num >> -shift);
  bool sticky = shift < 0 && BigInt(scaled << -shift) != num;
  BigInt q = scaled / den;
  sticky = sticky || q * den != scaled;
  const long drop = static_cast<long>(mp::msb(q)) - 52;
  const BigInt unit = BigInt(1) << drop;
  const BigInt rest = q & (unit - 1);
  q >>= drop;
  const BigInt half = unit >> 1;
  if (rest > half || (rest == half && (sticky || (q & 1) != 0))) ++q;
  return std::ldexp(q.convert_to<double>(), static_cast<int>(drop - shift));
}

inline double to_double(const Fraction& f) { return rounded_quotient(f.num, f.den); }

}  // namespace marrow::detail

#endif  // MARROW_SRC_EXACT_HPP_
