#include "colay/json_io.hpp"

#include <filesystem>
#include <fstream>

#include "colay/error.hpp"
#include "colay/prompt.hpp"

namespace colay {
namespace {

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ValidationError("expected an object", path);
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'", path + "/" + key);
  return *it;
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError("expected an integer", path);
  return j.get<int>();
}

}  // namespace

json schema_to_json(const AttributeSchema& schema) {
  json attrs = json::array();
  for (const auto& a : schema.attributes()) attrs.push_back({{"name", a.name}, {"cardinality", a.cardinality}});
  return {{"name", schema.name()},
          {"attributes", attrs},
          {"class_index", schema.class_index()},
          {"element_capacity", schema.capacity()},
          {"canvas_width", schema.canvas_width()},
          {"canvas_height", schema.canvas_height()},
          {"class_names", std::vector<std::string>(schema.class_names().begin(), schema.class_names().end())}};
}

SchemaPtr schema_from_json(const json& j) {
  try {
    std::vector<Attribute> attrs;
    for (const auto& a : require(j, "attributes", "")) {
      attrs.push_back({a.at("name").get<std::string>(), a.at("cardinality").get<int>()});
    }
    std::vector<std::string> names;
    if (j.contains("class_names")) names = j.at("class_names").get<std::vector<std::string>>();
    return std::make_shared<const AttributeSchema>(
        j.at("name").get<std::string>(), std::move(attrs), j.value("class_index", std::size_t{0}),
        j.value("element_capacity", 64), j.at("canvas_width").get<int>(), j.at("canvas_height").get<int>(),
        std::move(names));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed schema: ") + e.what(), "/schema");
  }
}

SchemaPtr load_schema(const std::string& name_or_path) {
  if (name_or_path == "toy" || name_or_path == "clay" || name_or_path == "c4") return builtin_schema(name_or_path);
  std::ifstream f(name_or_path);
  if (!f) throw ValidationError("unknown schema '" + name_or_path + "'", "/schema");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema file is not JSON: ") + e.what(), "/schema");
  }
  return schema_from_json(j);
}

json layout_to_json(const Layout& layout) {
  const auto& s = layout.schema();
  json elements = json::array();
  for (const auto& e : layout.elements()) {
    if (!e.valid) continue;
    json el = json::object();
    for (std::size_t i = 0; i < s.attribute_count(); ++i) el[s.attributes()[i].name] = e.values[i];
    el["valid"] = true;
    elements.push_back(std::move(el));
  }
  return {{"schema", s.name()}, {"elements", std::move(elements)}};
}

Layout layout_from_json(const json& j, const SchemaPtr& schema, const std::string& path) {
  if (!j.is_object()) throw ValidationError("layout must be an object", path);
  if (auto it = j.find("schema"); it != j.end() && it->is_string() && it->get<std::string>() != schema->name())
    throw ValidationError("layout schema '" + it->get<std::string>() + "' does not match '" + schema->name() + "'",
                          path + "/schema");
  const auto& els = require(j, "elements", path);
  if (!els.is_array()) throw ValidationError("elements must be an array", path + "/elements");
  std::vector<Element> valid;
  for (std::size_t n = 0; n < els.size(); ++n) {
    const auto& el = els[n];
    const std::string where = path + "/elements/" + std::to_string(n);
    if (!el.is_object()) throw ValidationError("element must be an object", where);
    const bool is_valid = el.value("valid", true);
    if (!is_valid) continue;
    Element e;
    e.valid = true;
    e.values.resize(schema->attribute_count());
    for (std::size_t i = 0; i < schema->attribute_count(); ++i) {
      const auto& name = schema->attributes()[i].name;
      auto it = el.find(name);
      if (it == el.end()) {
        // Style attributes may be omitted; class and coordinates may not.
        if (i == schema->class_index() || i == schema->x_min_index() || i == schema->y_min_index() ||
            i == schema->x_max_index() || i == schema->y_max_index())
          throw ValidationError("missing attribute '" + name + "'", where + "/" + name);
        e.values[i] = 0;
        continue;
      }
      e.values[i] = require_int(*it, where + "/" + name);
    }
    valid.push_back(std::move(e));
  }
  try {
    return Layout::from_valid(schema, std::move(valid));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), path + e.path());
  }
}

json prompt_to_json(const Prompt& p) {
  json out = json::array();
  for (const auto& s : p.sentences) {
    std::string text;
    for (std::size_t i = 0; i < s.size(); ++i) text += (i ? " " : "") + s[i];
    out.push_back(text);
  }
  return out;
}

Prompt prompt_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("prompt must be an array of sentences", path);
  Prompt p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw ValidationError("sentence must be a string", path + "/" + std::to_string(i));
    auto words = tokenize_words(j[i].get<std::string>());
    if (words.empty()) throw ValidationError("sentence has no words", path + "/" + std::to_string(i));
    p.sentences.push_back(std::move(words));
  }
  if (p.sentences.empty()) throw ValidationError("prompt must contain at least one sentence", path);
  return p;
}

json guidelines_to_json(const std::vector<Guideline>& gs) {
  json out = json::array();
  for (const auto& g : gs) out.push_back({{"axis", g.axis == Axis::X ? "x" : "y"}, {"pos", g.position}});
  return out;
}

std::vector<Guideline> guidelines_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("guidelines must be an array", path);
  std::vector<Guideline> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = path + "/" + std::to_string(i);
    const auto& axis = require(j[i], "axis", where);
    if (!axis.is_string() || (axis != "x" && axis != "y"))
      throw ValidationError("axis must be \"x\" or \"y\"", where + "/axis");
    out.push_back({axis == "x" ? Axis::X : Axis::Y, require_int(require(j[i], "pos", where), where + "/pos")});
  }
  return out;
}

json conditions_to_json(const ConditionSet& cs) {
  json out = json::object();
  out["prompt"] = cs.prompt ? prompt_to_json(*cs.prompt) : json(nullptr);
  out["class_count"] = cs.class_count ? json(*cs.class_count) : json(nullptr);
  out["given_design"] = cs.given_design ? layout_to_json(*cs.given_design) : json(nullptr);
  out["guidelines"] = cs.guidelines ? guidelines_to_json(*cs.guidelines) : json(nullptr);
  return out;
}

ConditionSet conditions_from_json(const json& j, const SchemaPtr& schema, const std::string& path) {
  if (!j.is_object()) throw ValidationError("conditions must be an object", path);
  ConditionSet cs;
  auto present = [&](const char* key) -> const json* {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? nullptr : &*it;
  };
  if (const json* p = present("prompt")) cs.prompt = prompt_from_json(*p, path + "/prompt");
  if (const json* c = present("class_count")) {
    if (!c->is_array()) throw ValidationError("class_count must be an array", path + "/class_count");
    std::vector<int> counts;
    for (std::size_t k = 0; k < c->size(); ++k)
      counts.push_back(require_int((*c)[k], path + "/class_count/" + std::to_string(k)));
    cs.class_count = std::move(counts);
  }
  if (const json* g = present("given_design")) cs.given_design = layout_from_json(*g, schema, path + "/given_design");
  if (const json* g = present("guidelines")) cs.guidelines = guidelines_from_json(*g, path + "/guidelines");
  try {
    validate_conditions(cs, *schema);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), path + e.path());
  }
  return cs;
}

}  // namespace colay
