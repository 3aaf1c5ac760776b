#include "bubblelab/money.hpp"

#include <cmath>
#include <stdexcept>

namespace bubblelab {

std::int64_t div_round_half_even(__int128 num, __int128 den) {
    if (den == 0) throw std::domain_error("division by zero in fixed-point arithmetic");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 q = num / den;
    __int128 r = num % den;
    if (r < 0) {  // floor division
        q -= 1;
        r += den;
    }
    __int128 twice = 2 * r;
    if (twice > den || (twice == den && (q % 2 != 0))) q += 1;
    return static_cast<std::int64_t>(q);
}

Money Money::from_double(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("non-finite cash amount");
    double scaled = value * static_cast<double>(kScale);
    return from_raw(static_cast<std::int64_t>(std::nearbyint(scaled)));
}

Money Money::parse(const std::string& text) {
    std::size_t i = 0;
    bool negative = false;
    if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
        negative = text[i] == '-';
        ++i;
    }
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    int frac_digits = 0;
    bool any_digit = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("bad decimal: " + text);
        whole = whole * 10 + (text[i] - '0');
        any_digit = true;
    }
    if (i < text.size()) {
        ++i;
        for (; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("bad decimal: " + text);
            if (frac_digits == 4) throw std::invalid_argument("more than 4 fractional digits: " + text);
            frac = frac * 10 + (text[i] - '0');
            ++frac_digits;
            any_digit = true;
        }
    }
    if (!any_digit) throw std::invalid_argument("bad decimal: " + text);
    while (frac_digits < 4) {
        frac *= 10;
        ++frac_digits;
    }
    std::int64_t raw = whole * kScale + frac;
    return from_raw(negative ? -raw : raw);
}

std::string Money::to_string() const {
    std::int64_t v = raw_ < 0 ? -raw_ : raw_;
    std::string out = raw_ < 0 ? "-" : "";
    out += std::to_string(v / kScale);
    std::int64_t frac = v % kScale;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, 4 - digits.size(), '0');
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += "." + digits;
    }
    return out;
}

Money Money::times(Money o) const {
    __int128 prod = static_cast<__int128>(raw_) * o.raw_;
    return from_raw(div_round_half_even(prod, kScale));
}

Money Money::divided_by(Money o) const {
    __int128 num = static_cast<__int128>(raw_) * kScale;
    return from_raw(div_round_half_even(num, o.raw_));
}

Money Money::divided_by(std::int64_t n) const { return from_raw(div_round_half_even(raw_, n)); }

}  // namespace bubblelab
