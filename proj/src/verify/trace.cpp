#include "mvgc/verify/trace.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

namespace mvgc::verify {

using probe::Field;
using probe::Kind;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_int(std::string_view s, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ScheduleError("schedule line " + std::to_string(line) + ": not an integer: '" +
                        std::string(s) + "'");
  }
  return v;
}

bool is_link_field(Field f) {
  return f == Field::head || f == Field::left || f == Field::right || f == Field::left_desc ||
         f == Field::right_desc;
}

bool is_node_field(Field f) {
  return is_link_field(f) || f == Field::status || f == Field::ts;
}

}  // namespace

Schedule parse_schedule(std::string_view text) {
  Schedule s;
  bool have_seed = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!have_seed) {
      if (line.substr(0, 5) != "seed ") {
        throw ScheduleError("schedule must start with 'seed <int>'");
      }
      s.seed = parse_int<std::uint64_t>(trim(line.substr(5)), line_no);
      have_seed = true;
      continue;
    }
    int p = parse_int<int>(line, line_no);
    if (p < 0) throw ScheduleError("schedule line " + std::to_string(line_no) + ": negative process");
    s.steps.push_back(p);
  }
  if (!have_seed) throw ScheduleError("schedule must start with 'seed <int>'");
  return s;
}

std::string format_schedule(const Schedule& schedule) {
  std::ostringstream out;
  out << "seed " << schedule.seed << '\n';
  for (int p : schedule.steps) out << p << '\n';
  return out.str();
}

bool operator==(const TraceEvent& x, const TraceEvent& y) {
  const auto& a = x.event;
  const auto& b = y.event;
  return x.process == y.process && x.op == y.op && x.time == y.time && a.kind == b.kind &&
         a.field == b.field && a.object == b.object && a.a == b.a && a.b == b.b && a.c == b.c &&
         a.d == b.d && a.ok == b.ok;
}

bool object_is_identity(const probe::Event& e) {
  switch (e.kind) {
    case Kind::read:
    case Kind::write:
    case Kind::cas:
      return is_node_field(e.field);
    case Kind::splice_call:
      return false;
    default:
      return true;
  }
}

bool a_is_identity(const probe::Event& e) {
  switch (e.kind) {
    case Kind::read:
    case Kind::cas:
      return is_link_field(e.field);
    case Kind::descriptor:
    case Kind::splice_call:
    case Kind::find_step:
      return true;
    default:
      return false;
  }
}

bool b_is_identity(const probe::Event& e) {
  switch (e.kind) {
    case Kind::write:
    case Kind::cas:
      return is_link_field(e.field);
    case Kind::descriptor:
    case Kind::splice_call:
      return true;
    default:
      return false;
  }
}

bool c_is_identity(const probe::Event& e) {
  return e.kind == Kind::descriptor || e.kind == Kind::splice_call || e.kind == Kind::node_init;
}

bool d_is_identity(const probe::Event& e) { return e.kind == Kind::node_init; }

std::int64_t UidNormalizer::map(std::int64_t raw) {
  if (raw < probe::kFirstUid) return raw;
  auto [it, inserted] = ids_.try_emplace(raw, next_);
  if (inserted) ++next_;
  return it->second;
}

probe::Event UidNormalizer::apply(probe::Event e) {
  if (object_is_identity(e)) e.object = static_cast<std::uint64_t>(map(static_cast<std::int64_t>(e.object)));
  if (a_is_identity(e)) e.a = map(e.a);
  if (b_is_identity(e)) e.b = map(e.b);
  if (c_is_identity(e)) e.c = map(e.c);
  if (d_is_identity(e)) e.d = map(e.d);
  return e;
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::read: return "read";
    case Kind::write: return "write";
    case Kind::cas: return "cas";
    case Kind::node_init: return "node_init";
    case Kind::descriptor: return "descriptor";
    case Kind::splice_call: return "splice_call";
    case Kind::find_begin: return "find_begin";
    case Kind::find_step: return "find_step";
    case Kind::remove_rec: return "remove_rec";
    case Kind::remove_begin: return "remove_begin";
  }
  return "?";
}

std::string_view field_name(Field f) {
  switch (f) {
    case Field::none: return "none";
    case Field::head: return "head";
    case Field::left: return "left";
    case Field::right: return "right";
    case Field::status: return "status";
    case Field::left_desc: return "left_desc";
    case Field::right_desc: return "right_desc";
    case Field::ts: return "ts";
    case Field::announcement: return "announcement";
    case Field::source: return "source";
    case Field::queue: return "queue";
  }
  return "?";
}

std::string trace_to_jsonl(const EventTrace& trace) {
  std::string out;
  for (const auto& te : trace.events) {
    const auto& e = te.event;
    nlohmann::json j = {{"t", te.time},           {"p", te.process},  {"op", te.op},
                        {"kind", kind_name(e.kind)}, {"field", field_name(e.field)},
                        {"obj", e.object},        {"a", e.a},         {"b", e.b},
                        {"c", e.c},               {"d", e.d},         {"ok", e.ok}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mvgc::verify
