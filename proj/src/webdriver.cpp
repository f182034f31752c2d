#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "guiscript/device.hpp"
#include "guiscript/error.hpp"

namespace guiscript {

namespace {

namespace pt = boost::property_tree;

constexpr std::string_view kElementKey = "element-6066-11e4-a52e-4f735466cecf";
constexpr int kDefaultScreenWidth = 1080;
constexpr int kDefaultScreenHeight = 1920;

std::optional<Bounds> parse_bounds(const std::string& text) {
  // "[left,top][right,bottom]"
  Bounds b;
  char c1, c2, c3, c4, c5, c6;
  std::istringstream in(text);
  if (in >> c1 >> b.left >> c2 >> b.top >> c3 >> c4 >> b.right >> c5 >> b.bottom >> c6 &&
      c1 == '[' && c2 == ',' && c3 == ']' && c4 == '[' && c5 == ',' && c6 == ']') {
    return b;
  }
  return std::nullopt;
}

std::optional<std::string> non_empty(const pt::ptree& attrs, const char* key) {
  auto v = attrs.get_optional<std::string>(key);
  if (!v || v->empty()) return std::nullopt;
  return *v;
}

bool flag(const pt::ptree& attrs, const char* key) {
  return attrs.get<std::string>(key, "false") == "true";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_element_key(const std::string& key) { return !key.empty() && key.front() != '<'; }

void collect(const pt::ptree& node, const std::string& path, std::vector<UiElement>& out) {
  std::map<std::string, int> totals;
  for (const auto& [tag, child] : node) {
    if (is_element_key(tag)) ++totals[tag];
  }
  std::map<std::string, int> seen;
  for (const auto& [tag, child] : node) {
    if (!is_element_key(tag)) continue;
    std::string xpath = path + "/" + tag;
    const int index = ++seen[tag];
    if (totals[tag] > 1) xpath += "[" + std::to_string(index) + "]";

    static const pt::ptree kNoAttrs;
    const auto attrs_opt = child.get_child_optional("<xmlattr>");
    const pt::ptree& attrs = attrs_opt ? *attrs_opt : kNoAttrs;

    UiElement e;
    e.xpath = xpath;
    e.class_name = attrs.get<std::string>("class", tag);
    e.resource_id = non_empty(attrs, "resource-id");
    e.text = non_empty(attrs, "text");
    e.hint = non_empty(attrs, "hint");
    if (!e.hint) e.hint = non_empty(attrs, "content-desc");
    e.clickable = flag(attrs, "clickable");
    e.editable = flag(attrs, "editable") || ends_with(e.class_name, "EditText") ||
                 ends_with(e.class_name, "TextField");
    if (auto checkable = attrs.get_optional<std::string>("checkable")) {
      if (*checkable == "true") e.checked = flag(attrs, "checked");
    } else if (attrs.get_optional<std::string>("checked")) {
      e.checked = flag(attrs, "checked");
    }
    if (auto b = attrs.get_optional<std::string>("bounds")) e.bounds = parse_bounds(*b);
    out.push_back(std::move(e));

    collect(child, xpath, out);
  }
}

struct WireReply {
  int status = 0;
  json value;
  std::string error;
};

}  // namespace

std::vector<UiElement> parse_page_source(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::parse_error, std::string("page source: ") + e.what());
  }
  std::vector<UiElement> elements;
  // The document element (e.g. <hierarchy>) is a container, not a widget.
  for (const auto& [tag, root] : tree) {
    if (!is_element_key(tag)) continue;
    collect(root, "/" + tag, elements);
  }
  if (elements.empty() && tree.empty()) throw Error(ErrorCode::parse_error, "page source is empty");
  return elements;
}

WebDriverClient::WebDriverClient(std::string server_url, DeviceConfig cfg,
                                 std::shared_ptr<Transport> transport)
    : server_url_(std::move(server_url)), cfg_(std::move(cfg)), transport_(std::move(transport)) {
  while (!server_url_.empty() && server_url_.back() == '/') server_url_.pop_back();
  if (!transport_) transport_ = std::make_shared<HttpTransport>();
}

WebDriverClient::~WebDriverClient() {
  try {
    quit();
  } catch (...) {
  }
}

json WebDriverClient::capabilities(const DeviceConfig& cfg) {
  return json{{"platformName", "Android"},
              {"appium:deviceName", cfg.device_name},
              {"appium:appPackage", cfg.app_package},
              {"appium:appActivity", cfg.app_activity},
              {"appium:noReset", cfg.no_reset},
              {"appium:fullReset", cfg.full_reset}};
}

json WebDriverClient::call(const std::string& method, const std::string& path, const json& body) {
  HttpRequest req;
  req.method = method;
  req.url = server_url_ + path;
  req.headers = {{"Content-Type", "application/json"}};
  if (method == "POST") req.body = body.is_null() ? "{}" : body.dump();

  HttpResponse resp;
  try {
    resp = transport_->send(req);
  } catch (const Error& e) {
    if (!session_id_.empty()) throw Error(ErrorCode::session_lost, e.what());
    throw;
  }

  WireReply reply;
  reply.status = resp.status;
  try {
    auto j = resp.body.empty() ? json::object() : json::parse(resp.body);
    reply.value = j.contains("value") ? j["value"] : j;
    if (reply.value.is_object() && reply.value.contains("error")) {
      reply.error = reply.value["error"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, method + " " + path + ": " + e.what());
  }
  if (resp.status < 400 && reply.error.empty()) return reply.value;

  const auto message = method + " " + path + ": HTTP " + std::to_string(resp.status) +
                       (reply.error.empty() ? "" : " " + reply.error);
  if (reply.error == "invalid session id") throw Error(ErrorCode::session_lost, message);
  if (reply.error == "unknown command" || reply.error == "unknown method" ||
      reply.error == "unsupported operation") {
    throw Error(ErrorCode::unsupported_action, message);
  }
  if (reply.error == "no such element") return json{{"error", reply.error}};
  throw Error(ErrorCode::transport_error, message);
}

void WebDriverClient::start() {
  if (!session_id_.empty()) return;
  json body{{"capabilities", {{"alwaysMatch", capabilities(cfg_)}, {"firstMatch", json::array({json::object()})}}}};
  auto value = call("POST", "/session", body);
  if (value.contains("sessionId")) {
    session_id_ = value["sessionId"].get<std::string>();
  }
  if (session_id_.empty()) throw Error(ErrorCode::session_lost, "server returned no session id");
}

void WebDriverClient::quit() {
  if (session_id_.empty()) return;
  const auto id = session_id_;
  session_id_.clear();
  last_snapshot_.reset();
  call("DELETE", "/session/" + id);
}

UiSnapshot WebDriverClient::snapshot() {
  if (session_id_.empty()) throw Error(ErrorCode::session_lost, "no active session");
  auto value = call("GET", "/session/" + session_id_ + "/source");
  if (!value.is_string()) throw Error(ErrorCode::parse_error, "page source is not a string");
  auto xml = value.get<std::string>();
  auto elements = parse_page_source(xml);
  last_snapshot_ = make_snapshot(std::move(elements), std::move(xml));
  return *last_snapshot_;
}

std::optional<std::string> WebDriverClient::find_element(const std::string& xpath) {
  auto value = call("POST", "/session/" + session_id_ + "/element",
                    json{{"using", "xpath"}, {"value", xpath}});
  if (value.contains("error")) return std::nullopt;
  for (const char* key : {kElementKey.data(), "ELEMENT"}) {
    if (value.contains(key)) return value[key].get<std::string>();
  }
  return std::nullopt;
}

json WebDriverClient::swipe_actions(const Action& action, const std::optional<Bounds>& area) const {
  const Bounds b = area.value_or(Bounds{0, 0, kDefaultScreenWidth, kDefaultScreenHeight});
  const int cx = (b.left + b.right) / 2;
  const int cy = (b.top + b.bottom) / 2;
  const int w = b.right - b.left;
  const int h = b.bottom - b.top;
  int sx = cx, sy = cy, ex = cx, ey = cy;
  const auto& dir = action.operation_text;
  if (dir == "up") {
    sy = b.top + h * 3 / 4;
    ey = b.top + h / 4;
  } else if (dir == "down") {
    sy = b.top + h / 4;
    ey = b.top + h * 3 / 4;
  } else if (dir == "left") {
    sx = b.left + w * 3 / 4;
    ex = b.left + w / 4;
  } else {
    sx = b.left + w / 4;
    ex = b.left + w * 3 / 4;
  }
  json steps = json::array({
      {{"type", "pointerMove"}, {"duration", 0}, {"x", sx}, {"y", sy}},
      {{"type", "pointerDown"}, {"button", 0}},
      {{"type", "pause"}, {"duration", 100}},
      {{"type", "pointerMove"}, {"duration", 400}, {"x", ex}, {"y", ey}},
      {{"type", "pointerUp"}, {"button", 0}},
  });
  return json{{"actions",
               json::array({{{"type", "pointer"},
                             {"id", "finger1"},
                             {"parameters", {{"pointerType", "touch"}}},
                             {"actions", steps}}})}};
}

ActionOutcome WebDriverClient::perform(const Action& action) {
  if (session_id_.empty()) throw Error(ErrorCode::session_lost, "no active session");
  if (auto err = validate_action(action)) {
    throw Error(ErrorCode::precondition, "invalid action: " + std::string(to_string(*err)));
  }
  const auto base = "/session/" + session_id_;
  bool implicit_focus = false;

  if (action.operation_type == OperationType::drag) {
    std::optional<Bounds> area;
    if (!action.element_xpath.empty()) {
      if (!find_element(action.element_xpath)) {
        return {OutcomeStatus::element_not_found, snapshot(), false};
      }
      if (last_snapshot_) {
        if (const auto* e = last_snapshot_->find(action.element_xpath)) area = e->bounds;
      }
    } else if (last_snapshot_ && !last_snapshot_->elements.empty()) {
      area = last_snapshot_->elements.front().bounds;
    }
    call("POST", base + "/actions", swipe_actions(action, area));
    return {OutcomeStatus::ok, snapshot(), false};
  }

  auto element_id = find_element(action.element_xpath);
  if (!element_id) return {OutcomeStatus::element_not_found, snapshot(), false};
  call("POST", base + "/element/" + *element_id + "/click", json::object());
  if (action.operation_type == OperationType::input) {
    implicit_focus = true;
    json chars = json::array();
    const auto& text = action.operation_text;
    for (std::size_t i = 0; i < text.size();) {
      // One entry per code point; continuation bytes stay with their lead byte.
      std::size_t n = 1;
      while (i + n < text.size() && (static_cast<unsigned char>(text[i + n]) & 0xC0) == 0x80) ++n;
      chars.push_back(text.substr(i, n));
      i += n;
    }
    call("POST", base + "/element/" + *element_id + "/value",
         json{{"text", action.operation_text}, {"value", chars}});
  }
  return {OutcomeStatus::ok, snapshot(), implicit_focus};
}

void WebDriverClient::reset(const DeviceConfig& cfg) {
  cfg_ = cfg;
  quit();
  start();
}

}  // namespace guiscript
