#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace bubblelab {

// Fixed-point decimal with four fractional digits. All cash, interest and
// dividend arithmetic goes through this type so that replays are bit-exact.
class Money {
public:
    static constexpr std::int64_t kScale = 10'000;

    constexpr Money() = default;

    static constexpr Money from_raw(std::int64_t raw) {
        Money m;
        m.raw_ = raw;
        return m;
    }
    static constexpr Money from_int(std::int64_t units) { return from_raw(units * kScale); }
    // Rounds half-even to the nearest representable value.
    static Money from_double(double value);
    // Accepts "12", "-3.5", "0.0001"; throws std::invalid_argument otherwise.
    static Money parse(const std::string& text);

    constexpr std::int64_t raw() const { return raw_; }
    double to_double() const { return static_cast<double>(raw_) / kScale; }
    // Shortest decimal rendering: "100", "104.5", "0.0001".
    std::string to_string() const;

    constexpr Money operator+(Money o) const { return from_raw(raw_ + o.raw_); }
    constexpr Money operator-(Money o) const { return from_raw(raw_ - o.raw_); }
    constexpr Money operator-() const { return from_raw(-raw_); }
    Money& operator+=(Money o) {
        raw_ += o.raw_;
        return *this;
    }
    Money& operator-=(Money o) {
        raw_ -= o.raw_;
        return *this;
    }
    // Exact: multiplying by a share count never needs rounding.
    constexpr Money operator*(std::int64_t n) const { return from_raw(raw_ * n); }

    // Product of two decimals, rounded half-even to four digits.
    Money times(Money o) const;
    // Quotient rounded half-even; divisor must be non-zero.
    Money divided_by(Money o) const;
    Money divided_by(std::int64_t n) const;

    constexpr auto operator<=>(const Money&) const = default;
    constexpr bool operator==(const Money&) const = default;

private:
    std::int64_t raw_ = 0;
};

inline constexpr Money operator*(std::int64_t n, Money m) { return m * n; }

// Half-even division of 128-bit numerator by positive or negative denominator.
std::int64_t div_round_half_even(__int128 num, __int128 den);

}  // namespace bubblelab
