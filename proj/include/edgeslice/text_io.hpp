#pragma once

#include "edgeslice/core.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

namespace edgeslice::text_io {

/// Shortest decimal form that parses back to the identical double.
inline std::string format(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ConfigError(context + ": bad number '" + token + "'");
    }
    return v;
}

inline std::string next_token(std::istream& in, const std::string& context) {
    std::string token;
    if (!(in >> token)) throw ConfigError(context + ": unexpected end of input");
    return token;
}

inline void expect(std::istream& in, const std::string& keyword, const std::string& context) {
    const auto token = next_token(in, context);
    if (token != keyword) throw ConfigError(context + ": expected '" + keyword + "', found '" + token + "'");
}

inline long parse_long(std::istream& in, const std::string& context) {
    const auto token = next_token(in, context);
    long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ConfigError(context + ": bad integer '" + token + "'");
    }
    return v;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << (c ? " " : "") << format(m(r, c));
        }
        out << '\n';
    }
}

inline Matrix read_matrix(std::istream& in, const std::string& context) {
    const long rows = parse_long(in, context);
    const long cols = parse_long(in, context);
    if (rows < 0 || cols < 0) throw ConfigError(context + ": negative matrix shape");
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) m(r, c) = parse_double(next_token(in, context), context);
    }
    return m;
}

inline void write_vector(std::ostream& out, const Vector& v) { write_matrix(out, Matrix(v)); }

inline Vector read_vector(std::istream& in, const std::string& context) {
    const Matrix m = read_matrix(in, context);
    if (m.cols() != 1) throw ConfigError(context + ": expected a column vector");
    return m.col(0);
}

}  // namespace edgeslice::text_io
