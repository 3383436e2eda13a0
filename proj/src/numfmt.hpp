#ifndef FTK_SRC_NUMFMT_HPP_
#define FTK_SRC_NUMFMT_HPP_

#include <charconv>
#include <string>

namespace ftk::detail {

// Shortest round-trip decimal form, always carrying a decimal point or
// exponent so the text is unambiguously floating point ("1" -> "1.0").
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

} // namespace ftk::detail

#endif // FTK_SRC_NUMFMT_HPP_
