#pragma once

// Fixed-point format algebra: the (S/I/F) partitioning of a machine word,
// raw-value encoding/decoding, and the single-operation result-format rules
// for addition and multiplication.

#include <gmpxx.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "fxpath/dyadic.hpp"

namespace fxpath {

class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// S sign (or pad) bits, I integer bits, F fraction bits. Data length is
// I + F; a stored word is S + I + F bits wide. For signed formats the S top
// bits are copies of the sign; for unsigned ones they are zero padding.
struct Format {
  int sign_bits = 0;
  int int_bits = 0;
  int frac_bits = 0;
  bool is_signed = false;
  bool two_field = false;  // was spelled "(I/F)" on input

  int width() const { return sign_bits + int_bits + frac_bits; }
  int data_bits() const { return int_bits + frac_bits; }
  int min_sign_bits() const { return is_signed ? 1 : 0; }

  bool valid() const {
    return sign_bits >= 0 && int_bits >= 0 && frac_bits >= 0 && width() >= 1 &&
           (!is_signed || sign_bits >= 1);
  }

  // Same value set, padding stripped: S reduced to 1 (signed) or 0 (unsigned).
  Format data_format() const { return Format{min_sign_bits(), int_bits, frac_bits, is_signed}; }

  mpz_class raw_min() const {
    if (!is_signed) return 0;
    mpz_class m = 1;
    m <<= static_cast<unsigned long>(data_bits());
    return -m;
  }

  mpz_class raw_max() const {
    mpz_class m = 1;
    m <<= static_cast<unsigned long>(data_bits());
    return m - 1;
  }

  std::string str() const {
    if (two_field && !is_signed)
      return "(" + std::to_string(int_bits) + "/" + std::to_string(frac_bits) + ")";
    return "(" + std::to_string(sign_bits) + "/" + std::to_string(int_bits) + "/" +
           std::to_string(frac_bits) + ")";
  }

  // Accepts "(S/I/F)" and "S/I/F"; the unsigned two-field spelling "(I/F)" is
  // taken as S = 0 with the spelling remembered. S >= 1 means signed.
  static std::optional<Format> parse(std::string_view s) {
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
    int fields[3] = {0, 0, 0};
    int count = 0;
    while (true) {
      size_t slash = s.find('/');
      std::string_view tok = s.substr(0, slash);
      if (count == 3 || tok.empty() || tok.find_first_not_of("0123456789") != std::string_view::npos)
        return std::nullopt;
      if (tok.size() > 6) return std::nullopt;  // keep widths sane
      fields[count++] = std::stoi(std::string(tok));
      if (slash == std::string_view::npos) break;
      s.remove_prefix(slash + 1);
    }
    Format f;
    if (count == 3) {
      f = Format{fields[0], fields[1], fields[2], fields[0] >= 1};
    } else if (count == 2) {
      f = Format{0, fields[0], fields[1], false, true};
    } else {
      return std::nullopt;
    }
    if (!f.valid()) return std::nullopt;
    return f;
  }

  friend bool operator==(const Format& a, const Format& b) {
    return a.sign_bits == b.sign_bits && a.int_bits == b.int_bits && a.frac_bits == b.frac_bits &&
           a.is_signed == b.is_signed;
  }
};

// Raw two's-complement payload plus the format it is stored in and the
// power-of-two scale applied so far. Represented value is raw * 2^(scale - F).
struct FixedValue {
  mpz_class raw;
  Format format;
  long scale_exp = 0;

  bool in_range() const { return raw >= format.raw_min() && raw <= format.raw_max(); }

  Dyadic value() const { return Dyadic(raw, scale_exp - format.frac_bits); }

  // Full W-bit two's-complement pattern, MSB first.
  std::string bit_pattern() const {
    mpz_class pat;
    mpz_fdiv_r_2exp(pat.get_mpz_t(), raw.get_mpz_t(), static_cast<mp_bitcnt_t>(format.width()));
    std::string bits = pat.get_str(2);
    bits.insert(0, static_cast<size_t>(format.width()) - bits.size(), '0');
    return bits;
  }
};

// Quantizes x into f by truncation toward negative infinity: raw = floor(x * 2^F).
inline FixedValue encode(const Dyadic& x, const Format& f) {
  FixedValue v{x.floor_to_exp(-f.frac_bits), f, 0};
  if (!v.in_range()) {
    mpz_class mag = v.raw < 0 ? mpz_class(-v.raw) : v.raw;
    size_t need = mpz_sizeinbase(mag.get_mpz_t(), 2);
    throw format_error("value " + x.to_exact_decimal() + " does not fit format " + f.str() +
                       " (raw " + v.raw.get_str() + " needs " + std::to_string(need) +
                       " data bits, format has " + std::to_string(f.data_bits()) + ")");
  }
  return v;
}

inline Dyadic decode(const FixedValue& v) { return v.value(); }

struct DecimalEncoding {
  FixedValue value;
  bool exact = false;  // no truncation happened
};

// Encodes a decimal literal without going through binary floating point:
// raw = floor(+-digits * 2^F / 10^k).
inline DecimalEncoding encode_decimal(std::string_view text, const Format& f) {
  std::string_view s = text;
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
    throw format_error("malformed decimal value '" + std::string(text) + "'");
  mpz_class num(digits, 10);
  if (neg) num = -num;
  num <<= static_cast<unsigned long>(f.frac_bits);
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, frac_len);
  mpz_class raw, rem;
  mpz_fdiv_qr(raw.get_mpz_t(), rem.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
  FixedValue v{std::move(raw), f, 0};
  if (!v.in_range())
    throw format_error("value " + std::string(text) + " does not fit format " + f.str());
  return DecimalEncoding{std::move(v), rem == 0};
}

// Promotes an unsigned format to a signed one with an extra integer bit.
inline Format to_signed(const Format& f) {
  if (f.is_signed) return f;
  return Format{1, f.int_bits + 1, f.frac_bits, true};
}

// Minimal worst-case result format of an addition: one extra integer bit,
// fraction parts aligned to the finer of the two.
inline Format add_min_format(const Format& a, const Format& b) {
  if (a.is_signed != b.is_signed)
    throw std::invalid_argument("add_min_format requires equal signedness; promote first");
  int i = std::max(a.int_bits, b.int_bits) + 1;
  int fr = std::max(a.frac_bits, b.frac_bits);
  return Format{a.is_signed ? 1 : 0, i, fr, a.is_signed};
}

// Minimal result format of a multiplication: data lengths add.
inline Format mul_min_format(const Format& a, const Format& b) {
  bool s = a.is_signed || b.is_signed;
  return Format{s ? 1 : 0, a.int_bits + b.int_bits, a.frac_bits + b.frac_bits, s};
}

struct WordFit {
  bool fits = false;
  Format format;    // padded to exactly W bits when fits
  int deficit = 0;  // missing bits when it does not
};

// Pads a minimal format into a W-bit machine word, or reports by how many
// bits it misses.
inline WordFit fit_to_word(const Format& minimal, int word) {
  if (word < 1) throw std::invalid_argument("word length must be >= 1");
  int data = minimal.data_bits();
  int s_min = minimal.min_sign_bits();
  if (data + s_min <= word) {
    Format padded{word - data, minimal.int_bits, minimal.frac_bits, minimal.is_signed};
    return WordFit{true, padded, 0};
  }
  return WordFit{false, minimal, data + s_min - word};
}

// Drops j fraction LSBs. The worst-case fresh truncation error is the sum of
// the dropped bit weights, (2^j - 1) * 2^-F, in pre-rescale value units.
inline std::pair<Format, Dyadic> truncate_lsbs(const Format& f, int j) {
  if (j < 0 || j > f.frac_bits)
    throw std::invalid_argument("cannot truncate " + std::to_string(j) + " bits from " + f.str());
  Format out = f;
  out.frac_bits -= j;
  out.two_field = false;
  mpz_class dropped = 1;
  dropped <<= static_cast<unsigned long>(j);
  return {out, Dyadic(dropped - 1, -f.frac_bits)};
}

}  // namespace fxpath
