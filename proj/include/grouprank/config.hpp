#pragma once

// Flat `key = value` configuration files. Blank lines and lines starting
// with '#' are ignored; keys are case-sensitive; a repeated key keeps the
// last value.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace grouprank {

class KeyValues {
public:
    static KeyValues parse(std::istream& in, const std::string& source = "<config>");
    static KeyValues load(const std::string& path);

    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    /// Typed accessors throw FormatError when the value does not parse.
    std::optional<std::int64_t> get_int(const std::string& key) const;
    std::optional<std::uint64_t> get_uint(const std::string& key) const;
    std::optional<double> get_real(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::string source_ = "<config>";
};

}  // namespace grouprank
