#pragma once

// Exact rational arithmetic. Every quantity in the library (times, rates,
// queue lengths, labels) is a Rat; no floating point appears anywhere in the
// core. Backed by boost::multiprecision::cpp_rational, which keeps values
// canonical: numerator/denominator coprime, denominator positive.

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include "ideflow/common.hpp"

namespace ideflow {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

class Rat {
  public:
    Rat() = default;
    Rat(int v) : v_(v) {}                 // NOLINT: implicit by design, literals abound
    Rat(long long v) : v_(v) {}           // NOLINT
    Rat(const BigInt& v) : v_(v) {}       // NOLINT
    explicit Rat(BigRat v) : v_(std::move(v)) {}
    Rat(long long num, long long den) : Rat(BigInt(num), BigInt(den)) {}
    Rat(const BigInt& num, const BigInt& den) {
        if (den == 0) throw ParamError("Rat: zero denominator");
        // cpp_rational requires a positive denominator; move the sign up.
        v_ = den < 0 ? BigRat(-num, -den) : BigRat(num, den);
    }

    /// Parses "p" or "p/q" with optional leading '-'. Throws ParseError.
    static Rat parse(std::string_view s);

    /// Renders "p" when the denominator is 1, else "p/q" (q > 0 always).
    std::string str() const {
        BigInt n = boost::multiprecision::numerator(v_);
        BigInt d = boost::multiprecision::denominator(v_);
        if (d == 1) return n.str();
        return n.str() + "/" + d.str();
    }

    BigInt num() const { return boost::multiprecision::numerator(v_); }
    BigInt den() const { return boost::multiprecision::denominator(v_); }
    const BigRat& raw() const { return v_; }

    int sign() const { return v_.sign(); }
    bool is_zero() const { return v_.is_zero(); }
    bool is_integer() const { return den() == 1; }

    Rat operator-() const { return Rat(BigRat(-v_)); }
    Rat& operator+=(const Rat& o) { v_ += o.v_; return *this; }
    Rat& operator-=(const Rat& o) { v_ -= o.v_; return *this; }
    Rat& operator*=(const Rat& o) { v_ *= o.v_; return *this; }
    Rat& operator/=(const Rat& o) {
        if (o.is_zero()) throw ParamError("Rat: division by zero");
        v_ /= o.v_;
        return *this;
    }

    friend Rat operator+(Rat a, const Rat& b) { a += b; return a; }
    friend Rat operator-(Rat a, const Rat& b) { a -= b; return a; }
    friend Rat operator*(Rat a, const Rat& b) { a *= b; return a; }
    friend Rat operator/(Rat a, const Rat& b) { a /= b; return a; }

    friend bool operator==(const Rat& a, const Rat& b) { return a.v_ == b.v_; }
    friend std::strong_ordering operator<=>(const Rat& a, const Rat& b) {
        if (a.v_ < b.v_) return std::strong_ordering::less;
        if (a.v_ > b.v_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

    friend std::ostream& operator<<(std::ostream& os, const Rat& r) { return os << r.str(); }

    /// Approximate double value; used only for human-facing diagnostics.
    double to_double() const { return v_.convert_to<double>(); }

  private:
    BigRat v_;
};

inline Rat Rat::parse(std::string_view s) {
    if (s.empty()) throw ParseError("Rat: empty string");
    const auto slash = s.find('/');
    const auto check_int = [](std::string_view t) {
        if (t.empty()) return false;
        std::size_t i = (t[0] == '-') ? 1 : 0;
        if (i == t.size()) return false;
        for (; i < t.size(); ++i)
            if (t[i] < '0' || t[i] > '9') return false;
        return true;
    };
    try {
        if (slash == std::string_view::npos) {
            if (!check_int(s)) throw ParseError("Rat: malformed integer '" + std::string(s) + "'");
            return Rat(BigInt(std::string(s)));
        }
        std::string_view ns = s.substr(0, slash);
        std::string_view ds = s.substr(slash + 1);
        if (!check_int(ns) || !check_int(ds))
            throw ParseError("Rat: malformed rational '" + std::string(s) + "'");
        BigInt n{std::string(ns)}, d{std::string(ds)};
        if (d == 0) throw ParseError("Rat: zero denominator in '" + std::string(s) + "'");
        return Rat(n, d);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError("Rat: cannot parse '" + std::string(s) + "': " + e.what());
    }
}

inline Rat abs(const Rat& r) { return r.sign() < 0 ? -r : r; }

inline const Rat& min(const Rat& a, const Rat& b) { return b < a ? b : a; }
inline const Rat& max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace ideflow
