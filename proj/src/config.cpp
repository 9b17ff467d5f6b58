#include "grouprank/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "grouprank/core.hpp"

namespace grouprank {

namespace {

std::string trimmed(std::string_view s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

template <typename T>
std::optional<T> convert(const std::string& text) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
    KeyValues kv;
    kv.source_ = source;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto body = trimmed(line);
        if (body.empty() || body.front() == '#') continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) throw FormatError(source, lineno, "expected key = value");
        auto key = trimmed(std::string_view(body).substr(0, eq));
        if (key.empty()) throw FormatError(source, lineno, "empty key");
        kv.set(std::move(key), trimmed(std::string_view(body).substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path, 0, "cannot open config file");
    return parse(in, path);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::int64_t> KeyValues::get_int(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    auto v = convert<std::int64_t>(*raw);
    if (!v) throw FormatError(source_, 0, "'" + key + "' is not an integer: " + *raw);
    return v;
}

std::optional<std::uint64_t> KeyValues::get_uint(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    auto v = convert<std::uint64_t>(*raw);
    if (!v) throw FormatError(source_, 0, "'" + key + "' is not a non-negative integer: " + *raw);
    return v;
}

std::optional<double> KeyValues::get_real(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    auto v = convert<double>(*raw);
    if (!v) throw FormatError(source_, 0, "'" + key + "' is not a number: " + *raw);
    return v;
}

std::optional<bool> KeyValues::get_bool(const std::string& key) const {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    std::string v = *raw;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw FormatError(source_, 0, "'" + key + "' is not a boolean: " + *raw);
}

}  // namespace grouprank
