#pragma once

#include <string>

#include "json.hpp"

#include "colay/conditions.hpp"
#include "colay/layout.hpp"

namespace colay {

using nlohmann::json;

json schema_to_json(const AttributeSchema& schema);
SchemaPtr schema_from_json(const json& j);
// Builtin name or path to a schema JSON file.
SchemaPtr load_schema(const std::string& name_or_path);

json layout_to_json(const Layout& layout);
// Throws ValidationError with a path rooted at `path`.
Layout layout_from_json(const json& j, const SchemaPtr& schema, const std::string& path = "");

json prompt_to_json(const Prompt& p);
Prompt prompt_from_json(const json& j, const std::string& path = "");

json guidelines_to_json(const std::vector<Guideline>& gs);
std::vector<Guideline> guidelines_from_json(const json& j, const std::string& path = "");

json conditions_to_json(const ConditionSet& cs);
ConditionSet conditions_from_json(const json& j, const SchemaPtr& schema, const std::string& path = "");

}  // namespace colay
