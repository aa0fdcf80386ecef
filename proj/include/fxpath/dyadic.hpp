#pragma once

// Exact dyadic rationals (m * 2^e over GMP integers). All error bounds and
// reference values in this library live in this domain; nothing here ever
// touches floating point.

#include <gmpxx.h>

#include <compare>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fxpath {

class Dyadic {
 public:
  Dyadic() = default;

  Dyadic(mpz_class mantissa, long exponent) : mant_(std::move(mantissa)), exp_(exponent) {
    normalize();
  }

  static Dyadic from_integer(mpz_class v) { return Dyadic(std::move(v), 0); }

  static Dyadic pow2(long e) { return Dyadic(1, e); }

  static Dyadic zero() { return Dyadic(); }

  const mpz_class& mantissa() const { return mant_; }
  long exponent() const { return exp_; }

  bool is_zero() const { return mant_ == 0; }
  int sign() const { return sgn(mant_); }

  Dyadic operator-() const { return Dyadic(-mant_, exp_); }

  Dyadic abs() const { return mant_ < 0 ? -*this : *this; }

  // Value scaled by 2^k, exactly.
  Dyadic mul_pow2(long k) const { return is_zero() ? Dyadic() : Dyadic(mant_, exp_ + k); }

  Dyadic half() const { return mul_pow2(-1); }

  friend Dyadic operator+(const Dyadic& a, const Dyadic& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    long e = std::min(a.exp_, b.exp_);
    mpz_class m = shifted(a.mant_, a.exp_ - e) + shifted(b.mant_, b.exp_ - e);
    return Dyadic(std::move(m), e);
  }

  friend Dyadic operator-(const Dyadic& a, const Dyadic& b) { return a + (-b); }

  friend Dyadic operator*(const Dyadic& a, const Dyadic& b) {
    return Dyadic(a.mant_ * b.mant_, a.exp_ + b.exp_);
  }

  // floor(value / 2^e) as an exact integer.
  mpz_class floor_to_exp(long e) const {
    if (exp_ >= e) return shifted(mant_, exp_ - e);
    mpz_class q;
    mpz_fdiv_q_2exp(q.get_mpz_t(), mant_.get_mpz_t(), static_cast<mp_bitcnt_t>(e - exp_));
    return q;
  }

  int compare(const Dyadic& other) const { return (*this - other).sign(); }

  friend bool operator==(const Dyadic& a, const Dyadic& b) { return a.compare(b) == 0; }
  friend bool operator!=(const Dyadic& a, const Dyadic& b) { return a.compare(b) != 0; }
  friend bool operator<(const Dyadic& a, const Dyadic& b) { return a.compare(b) < 0; }
  friend bool operator<=(const Dyadic& a, const Dyadic& b) { return a.compare(b) <= 0; }
  friend bool operator>(const Dyadic& a, const Dyadic& b) { return a.compare(b) > 0; }
  friend bool operator>=(const Dyadic& a, const Dyadic& b) { return a.compare(b) >= 0; }

  // Renders the value as a sum of signed powers of two, largest weight first:
  // 3*2^-17 prints as "2^-16+2^-17". Zero prints as "0".
  std::string to_terms() const {
    if (is_zero()) return "0";
    std::string out;
    mpz_class m = ::abs(mant_);
    if (mant_ < 0) out += '-';
    size_t bits = mpz_sizeinbase(m.get_mpz_t(), 2);
    bool first = true;
    for (size_t i = bits; i-- > 0;) {
      if (!mpz_tstbit(m.get_mpz_t(), i)) continue;
      if (!first) out += '+';
      out += "2^" + std::to_string(exp_ + static_cast<long>(i));
      first = false;
    }
    return out;
  }

  // Fixed-point decimal with `places` fraction digits, rounded half to even.
  std::string to_decimal(int places) const {
    mpz_class mag = ::abs(mant_);
    mpz_class pow10;
    mpz_ui_pow_ui(pow10.get_mpz_t(), 10, static_cast<unsigned long>(places));
    mpz_class q;
    if (exp_ >= 0) {
      q = shifted(mag, exp_) * pow10;
    } else {
      mpz_class num = mag * pow10;
      mpz_class r;
      mpz_fdiv_qr_2exp(q.get_mpz_t(), r.get_mpz_t(), num.get_mpz_t(),
                       static_cast<mp_bitcnt_t>(-exp_));
      mpz_class twice = r * 2;
      mpz_class den = shifted(mpz_class(1), -exp_);
      int c = cmp(twice, den);
      if (c > 0 || (c == 0 && mpz_odd_p(q.get_mpz_t()))) q += 1;
    }
    mpz_class ip = q / pow10;
    std::string out = ip.get_str();
    if (places > 0) {
      std::string frac = mpz_class(q % pow10).get_str();
      frac.insert(0, static_cast<size_t>(places) - frac.size(), '0');
      out += "." + frac;
    }
    if (mant_ < 0 && q != 0) out.insert(0, 1, '-');
    return out;
  }

  // Exact finite decimal expansion (every dyadic has one), trailing zeros
  // stripped: 95*2^-4 prints as "5.9375".
  std::string to_exact_decimal() const {
    if (is_zero()) return "0";
    std::string sign_str = mant_ < 0 ? "-" : "";
    mpz_class mag = ::abs(mant_);
    if (exp_ >= 0) return sign_str + shifted(mag, exp_).get_str();
    mpz_class pow5;
    mpz_ui_pow_ui(pow5.get_mpz_t(), 5, static_cast<unsigned long>(-exp_));
    std::string digits = mpz_class(mag * pow5).get_str();
    size_t frac_len = static_cast<size_t>(-exp_);
    if (digits.size() <= frac_len) digits.insert(0, frac_len + 1 - digits.size(), '0');
    digits.insert(digits.size() - frac_len, ".");
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
    return sign_str + digits;
  }

  // Inverse of to_terms.
  static std::optional<Dyadic> parse_terms(std::string_view s) {
    if (s == "0") return Dyadic();
    bool neg = false;
    if (!s.empty() && s.front() == '-') {
      neg = true;
      s.remove_prefix(1);
    }
    Dyadic sum;
    while (!s.empty()) {
      size_t plus = s.find('+');
      std::string_view term = s.substr(0, plus);
      if (term.size() < 3 || term[0] != '2' || term[1] != '^') return std::nullopt;
      errno = 0;
      char* end = nullptr;
      std::string digits(term.substr(2));
      long e = std::strtol(digits.c_str(), &end, 10);
      if (errno != 0 || end == digits.c_str() || *end != '\0') return std::nullopt;
      sum = sum + pow2(e);
      if (plus == std::string_view::npos) break;
      s.remove_prefix(plus + 1);
    }
    if (sum.is_zero()) return std::nullopt;
    return neg ? -sum : sum;
  }

  // Parses a plain decimal literal when it is exactly dyadic ("5.9375" works,
  // "0.3" does not).
  static std::optional<Dyadic> parse_decimal(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      neg = s.front() == '-';
      s.remove_prefix(1);
    }
    size_t dot = s.find('.');
    std::string digits;
    size_t frac_len = 0;
    if (dot == std::string_view::npos) {
      digits = std::string(s);
    } else {
      digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
      frac_len = s.size() - dot - 1;
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
      return std::nullopt;
    mpz_class n(digits, 10);
    mpz_class pow5;
    mpz_ui_pow_ui(pow5.get_mpz_t(), 5, frac_len);
    mpz_class q, r;
    mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), n.get_mpz_t(), pow5.get_mpz_t());
    if (r != 0) return std::nullopt;
    if (neg) q = -q;
    return Dyadic(std::move(q), -static_cast<long>(frac_len));
  }

 private:
  static mpz_class shifted(const mpz_class& m, long left) {
    mpz_class r;
    mpz_mul_2exp(r.get_mpz_t(), m.get_mpz_t(), static_cast<mp_bitcnt_t>(left));
    return r;
  }

  static void mpz_fdiv_qr_2exp(mpz_ptr q, mpz_ptr r, mpz_srcptr n, mp_bitcnt_t b) {
    mpz_fdiv_q_2exp(q, n, b);
    mpz_fdiv_r_2exp(r, n, b);
  }

  void normalize() {
    if (mant_ == 0) {
      exp_ = 0;
      return;
    }
    mp_bitcnt_t tz = mpz_scan1(mant_.get_mpz_t(), 0);
    if (tz > 0) {
      mpz_fdiv_q_2exp(mant_.get_mpz_t(), mant_.get_mpz_t(), tz);
      exp_ += static_cast<long>(tz);
    }
  }

  mpz_class mant_{0};
  long exp_ = 0;
};

}  // namespace fxpath
