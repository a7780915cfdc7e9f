#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace veriq {

// Base error for everything the library throws deliberately.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class AttrType { Text, Int, Real, Bool, Categorical };

inline const char* attr_type_name(AttrType t) {
    switch (t) {
        case AttrType::Text: return "text";
        case AttrType::Int: return "int";
        case AttrType::Real: return "real";
        case AttrType::Bool: return "bool";
        case AttrType::Categorical: return "categorical";
    }
    return "?";
}

inline std::optional<AttrType> attr_type_from_name(const std::string& s) {
    if (s == "text") return AttrType::Text;
    if (s == "int") return AttrType::Int;
    if (s == "real") return AttrType::Real;
    if (s == "bool") return AttrType::Bool;
    if (s == "categorical") return AttrType::Categorical;
    return std::nullopt;
}

// A single typed attribute value. Text and categorical values are both
// strings; categorical values compare by exact string equality.
class AttrValue {
public:
    AttrValue() : type_(AttrType::Bool), store_(false) {}

    static AttrValue text(std::string s) { return AttrValue(AttrType::Text, std::move(s)); }
    static AttrValue categorical(std::string s) { return AttrValue(AttrType::Categorical, std::move(s)); }
    static AttrValue integer(std::int64_t v) { return AttrValue(AttrType::Int, v); }
    static AttrValue real(double v) { return AttrValue(AttrType::Real, v); }
    static AttrValue boolean(bool v) { return AttrValue(AttrType::Bool, v); }

    AttrType type() const { return type_; }

    const std::string& as_string() const {
        if (type_ != AttrType::Text && type_ != AttrType::Categorical)
            throw Error("attribute is not string-valued");
        return std::get<std::string>(store_);
    }
    std::int64_t as_int() const {
        if (type_ != AttrType::Int) throw Error("attribute is not an int");
        return std::get<std::int64_t>(store_);
    }
    double as_real() const {
        if (type_ == AttrType::Int) return static_cast<double>(std::get<std::int64_t>(store_));
        if (type_ != AttrType::Real) throw Error("attribute is not numeric");
        return std::get<double>(store_);
    }
    bool as_bool() const {
        if (type_ != AttrType::Bool) throw Error("attribute is not a bool");
        return std::get<bool>(store_);
    }

    bool is_numeric() const { return type_ == AttrType::Int || type_ == AttrType::Real; }

    // Rendering used for prompt substitution and reports.
    std::string to_display() const {
        switch (type_) {
            case AttrType::Text:
            case AttrType::Categorical:
                return std::get<std::string>(store_);
            case AttrType::Int:
                return std::to_string(std::get<std::int64_t>(store_));
            case AttrType::Real: {
                std::ostringstream os;
                os.precision(17);
                os << std::get<double>(store_);
                return os.str();
            }
            case AttrType::Bool:
                return std::get<bool>(store_) ? "true" : "false";
        }
        return {};
    }

    friend bool operator==(const AttrValue& a, const AttrValue& b) {
        if (a.is_numeric() && b.is_numeric()) return a.as_real() == b.as_real();
        if (a.type_ != b.type_) return false;
        return a.store_ == b.store_;
    }
    friend bool operator!=(const AttrValue& a, const AttrValue& b) { return !(a == b); }

private:
    AttrValue(AttrType t, std::variant<std::string, std::int64_t, double, bool> v)
        : type_(t), store_(std::move(v)) {}

    AttrType type_;
    std::variant<std::string, std::int64_t, double, bool> store_;
};

}  // namespace veriq
