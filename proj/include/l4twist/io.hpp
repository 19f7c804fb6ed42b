#pragma once

// Locale-independent number formatting and small CSV / JSON emitters.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "l4twist/errors.hpp"

namespace l4twist {

/// General notation, 17 significant digits ("nan", "inf", "-inf" otherwise).
inline std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, r.ptr};
}

/// Fixed notation with the given number of decimals, for file names.
inline std::string format_fixed(double v, int decimals = 6)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
    return {buf, r.ptr};
}

/// "stem_mu0.009140_E0.020000.ext".
inline std::string parameter_file_name(std::string_view stem, double mu, double E,
                                       std::string_view ext)
{
    std::string s(stem);
    s += "_mu" + format_fixed(mu) + "_E" + format_fixed(E) + ".";
    s += ext;
    return s;
}

inline std::string parameter_file_name(std::string_view stem, double mu, std::string_view ext)
{
    std::string s(stem);
    s += "_mu" + format_fixed(mu) + ".";
    s += ext;
    return s;
}

/// One CSV field; quoted when it holds a separator, quote or newline.
inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& field(std::string_view s)
    {
        sep();
        os_ << csv_field(s);
        return *this;
    }

    CsvWriter& field(double v)
    {
        sep();
        os_ << format_number(v);
        return *this;
    }

    CsvWriter& field(long long v)
    {
        sep();
        os_ << v;
        return *this;
    }

    CsvWriter& field(std::size_t v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }

    void end_row()
    {
        os_ << '\n';
        first_ = true;
    }

    void header(std::initializer_list<std::string_view> names)
    {
        for (auto n : names) field(n);
        end_row();
    }

private:
    void sep()
    {
        if (!first_) os_ << ',';
        first_ = false;
    }

    std::ostream& os_;
    bool first_ = true;
};

inline std::string json_string(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out + "\"";
}

/// JSON number with 17 significant digits; non-finite values become null.
inline std::string json_number(double v) { return std::isfinite(v) ? format_number(v) : "null"; }

/// Minimal streaming JSON writer producing compact, deterministic output.
class JsonWriter {
public:
    explicit JsonWriter(std::ostream& os) : os_(os) {}

    JsonWriter& begin_object()
    {
        value_prefix();
        os_ << '{';
        stack_.push_back(true);
        return *this;
    }

    JsonWriter& end_object()
    {
        stack_.pop_back();
        os_ << '}';
        return *this;
    }

    JsonWriter& begin_array()
    {
        value_prefix();
        os_ << '[';
        stack_.push_back(true);
        return *this;
    }

    JsonWriter& end_array()
    {
        stack_.pop_back();
        os_ << ']';
        return *this;
    }

    JsonWriter& key(std::string_view k)
    {
        if (!stack_.back()) os_ << ',';
        stack_.back() = false;
        os_ << json_string(k) << ':';
        after_key_ = true;
        return *this;
    }

    JsonWriter& value(double v)
    {
        value_prefix();
        os_ << json_number(v);
        return *this;
    }

    JsonWriter& value(long long v)
    {
        value_prefix();
        os_ << v;
        return *this;
    }

    JsonWriter& value(int v) { return value(static_cast<long long>(v)); }
    JsonWriter& value(std::size_t v) { return value(static_cast<long long>(v)); }

    JsonWriter& value(bool v)
    {
        value_prefix();
        os_ << (v ? "true" : "false");
        return *this;
    }

    JsonWriter& value(std::string_view s)
    {
        value_prefix();
        os_ << json_string(s);
        return *this;
    }

    JsonWriter& value(const char* s) { return value(std::string_view(s)); }

    template <class T>
    JsonWriter& member(std::string_view k, const T& v)
    {
        key(k);
        return value(v);
    }

private:
    void value_prefix()
    {
        if (after_key_) {
            after_key_ = false;
            return;
        }
        if (!stack_.empty()) {
            if (!stack_.back()) os_ << ',';
            stack_.back() = false;
        }
    }

    std::ostream& os_;
    std::vector<bool> stack_;
    bool after_key_ = false;
};

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::InvalidParameter, "cannot write " + path);
    return os;
}

} // namespace l4twist
