#pragma once

// Model files and locale-independent number formatting.
//
// A model file is a JSON object with exactly two keys:
//     {"mu": [m1, ..., mp], "sigma": [[s11, ..., s1p], ..., [sp1, ..., spp]]}

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/model.hpp"

namespace nratio::io {

/// Malformed input file or argument (as opposed to a numerical failure).
class InputError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline double number_at(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number())
        throw InputError("field " + where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
        throw InputError("field " + where + ": not finite");
    return v;
}

} // namespace detail

inline NormalRatioModel parse_model(std::string_view text, const std::string& source = "model") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(source + ": " + e.what());
    }
    if (!doc.is_object())
        throw InputError(source + ": top level must be an object with keys mu and sigma");
    for (const auto& item : doc.items())
        if (item.key() != "mu" && item.key() != "sigma")
            throw InputError(source + ": unknown key '" + item.key() + "'");
    if (!doc.contains("mu"))
        throw InputError(source + ": missing key 'mu'");
    if (!doc.contains("sigma"))
        throw InputError(source + ": missing key 'sigma'");

    const auto& jm = doc["mu"];
    if (!jm.is_array())
        throw InputError(source + ": field mu must be an array");
    Vector mu;
    for (std::size_t i = 0; i < jm.size(); ++i)
        mu.push_back(detail::number_at(jm[i], "mu[" + std::to_string(i) + "]"));
    if (mu.size() < 2)
        throw InputError(source + ": field mu must have at least 2 entries, got " + std::to_string(mu.size()));

    const auto& js = doc["sigma"];
    if (!js.is_array() || js.size() != mu.size())
        throw InputError(source + ": field sigma must be an array of " + std::to_string(mu.size()) + " rows");
    Matrix sigma(mu.size(), mu.size());
    for (std::size_t i = 0; i < js.size(); ++i) {
        const auto& row = js[i];
        if (!row.is_array() || row.size() != mu.size())
            throw InputError(source + ": field sigma[" + std::to_string(i) + "] must have " +
                             std::to_string(mu.size()) + " entries");
        for (std::size_t j = 0; j < row.size(); ++j)
            sigma(i, j) = detail::number_at(row[j], "sigma[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
    try {
        return NormalRatioModel(std::move(mu), SpdMatrix(sigma));
    } catch (const Error& e) {
        throw InputError(source + ": field sigma: " + e.what());
    }
}

inline NormalRatioModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str(), path);
}

inline std::string model_to_json(const NormalRatioModel& model) {
    nlohmann::json j;
    j["mu"] = model.mu();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < model.p(); ++i) {
        const auto r = model.sigma().entries().row(i);
        rows.emplace_back(r.begin(), r.end());
    }
    j["sigma"] = rows;
    return j.dump();
}

/// Parses "v1,v2,...": every token must be a complete finite decimal number.
inline Vector parse_list(std::string_view text, const std::string& what) {
    Vector out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = text.find(',', start);
        std::string_view tok = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!tok.empty() && tok.front() == ' ')
            tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ')
            tok.remove_suffix(1);
        if (!tok.empty() && tok.front() == '+')
            tok.remove_prefix(1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
            throw InputError(what + ": invalid number '" + std::string(tok) + "' at position " +
                             std::to_string(out.size() + 1));
        out.push_back(v);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

/// Shortest round-trip form, but never fewer than `min_digits` significant digits.
inline std::string format_number(double v, int min_digits = 17) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, min_digits);
    std::string s(buf, res.ptr);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    if (back != v && std::isfinite(v)) {
        res = std::to_chars(buf, buf + sizeof buf, v);
        s.assign(buf, res.ptr);
    }
    return s;
}

/// Exactly `digits` significant digits (trailing zeros dropped); for error estimates.
inline std::string format_error(double v, int digits = 3) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    return std::string(buf, res.ptr);
}

} // namespace nratio::io
