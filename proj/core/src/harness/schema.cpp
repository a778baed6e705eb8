// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <cmath>
#include <vector>

#include "rfo/embedded_schema.hpp"
#include "rfo/harness.hpp"

namespace rfo::harness {

const nlohmann::json& config_schema() {
    static const nlohmann::json schema = nlohmann::json::parse(kEmbeddedConfigSchema);
    return schema;
}

namespace {

using nlohmann::json;

bool has_type(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "number") return value.is_number();
    if (type == "integer") {
        if (value.is_number_integer()) return true;
        if (value.is_number_float()) {
            const double x = value.get<double>();
            return std::isfinite(x) && x == static_cast<double>(static_cast<long long>(x));
        }
        return false;
    }
    return false;
}

std::string pointer_child(const std::string& base, const std::string& token) {
    return base + "/" + token;
}

class Validator {
public:
    std::vector<std::string> errors;

    void check(const json& value, const json& schema, const std::string& where) {
        if (!schema.is_object()) {
            return;
        }
        if (auto it = schema.find("type"); it != schema.end()) {
            bool ok = false;
            if (it->is_string()) {
                ok = has_type(value, it->get<std::string>());
            } else if (it->is_array()) {
                for (const auto& t : *it) {
                    ok = ok || has_type(value, t.get<std::string>());
                }
            }
            if (!ok) {
                fail(where, "expected type " + it->dump() + ", got " + std::string(value.type_name()));
                return;
            }
        }
        if (auto it = schema.find("enum"); it != schema.end()) {
            bool found = false;
            for (const auto& option : *it) {
                found = found || option == value;
            }
            if (!found) {
                fail(where, "value " + value.dump() + " is not one of " + it->dump());
            }
        }
        if (value.is_number()) {
            const double x = value.get<double>();
            bound(schema, "minimum", where, [&](double b) { return x >= b; }, ">=", x);
            bound(schema, "maximum", where, [&](double b) { return x <= b; }, "<=", x);
            bound(schema, "exclusiveMinimum", where, [&](double b) { return x > b; }, ">", x);
            bound(schema, "exclusiveMaximum", where, [&](double b) { return x < b; }, "<", x);
        }
        if (value.is_string()) {
            if (auto it = schema.find("minLength"); it != schema.end() &&
                                                    value.get<std::string>().size() < it->get<std::size_t>()) {
                fail(where, "string shorter than " + it->dump());
            }
        }
        if (value.is_array()) {
            if (auto it = schema.find("minItems"); it != schema.end() && value.size() < it->get<std::size_t>()) {
                fail(where, "needs at least " + it->dump() + " items");
            }
            if (auto it = schema.find("maxItems"); it != schema.end() && value.size() > it->get<std::size_t>()) {
                fail(where, "allows at most " + it->dump() + " items");
            }
            if (auto it = schema.find("items"); it != schema.end()) {
                for (std::size_t i = 0; i < value.size(); ++i) {
                    check(value[i], *it, pointer_child(where, std::to_string(i)));
                }
            }
        }
        if (value.is_object()) {
            static const json empty = json::object();
            const json& props = schema.contains("properties") ? schema["properties"] : empty;
            if (auto it = schema.find("required"); it != schema.end()) {
                for (const auto& key : *it) {
                    if (!value.contains(key.get<std::string>())) {
                        fail(where, "missing required property '" + key.get<std::string>() + "'");
                    }
                }
            }
            const bool closed = schema.contains("additionalProperties") &&
                                schema["additionalProperties"].is_boolean() &&
                                !schema["additionalProperties"].get<bool>();
            for (const auto& [key, child] : value.items()) {
                if (auto p = props.find(key); p != props.end()) {
                    check(child, *p, pointer_child(where, key));
                } else if (closed) {
                    fail(where, "unknown property '" + key + "'");
                }
            }
        }
    }

private:
    void fail(const std::string& where, const std::string& message) {
        errors.push_back((where.empty() ? std::string("/") : where) + ": " + message);
    }

    template <typename Pred>
    void bound(const json& schema, const char* keyword, const std::string& where, Pred ok, const char* op,
               double x) {
        if (auto it = schema.find(keyword); it != schema.end() && it->is_number() && !ok(it->get<double>())) {
            fail(where, "value " + json(x).dump() + " must be " + op + " " + it->dump());
        }
    }
};

}  // namespace

std::vector<std::string> validate_schema(const nlohmann::json& doc, const nlohmann::json& schema) {
    Validator v;
    v.check(doc, schema, "");
    return v.errors;
}

}  // namespace rfo::harness
