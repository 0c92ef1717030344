#include "theas/stats_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "theas/errors.hpp"

namespace theas::stats {

namespace {

constexpr std::string_view kPlaceholder = "{N}";

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

std::string collapse_blanks(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool prev_blank = false;
  for (char c : s) {
    if (is_blank(c)) {
      if (!prev_blank) out.push_back(' ');
      prev_blank = true;
    } else {
      out.push_back(c);
      prev_blank = false;
    }
  }
  return out;
}

std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_blank(s[i])) ++i;
    const auto start = i;
    while (i < s.size() && !is_blank(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void finish_snapshot(StatsSnapshot& snap) {
  auto it = snap.entries.find(std::string(kSimSecondsKey));
  snap.has_sim_seconds = it != snap.entries.end();
  snap.sim_seconds = snap.has_sim_seconds ? it->second : 0.0;
}

}  // namespace

std::string format(const Diagnostic& d) {
  return "line:" + std::to_string(d.line) + " " + d.reason;
}

bool parse_value(std::string_view token, double& out) {
  bool percent = false;
  if (!token.empty() && token.back() == '%') {
    percent = true;
    token.remove_suffix(1);
  }
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return false;
  if (!std::isfinite(v)) return false;
  out = percent ? v / 100.0 : v;
  return true;
}

ParseResult parse_stats_stream(std::istream& in) {
  static const std::string begin = collapse_blanks(kBeginMarker);
  static const std::string end = collapse_blanks(kEndMarker);

  ParseResult result;
  std::optional<StatsSnapshot> open;
  std::size_t open_line = 0;
  std::string raw;
  std::size_t line_no = 0;

  const auto skip = [&](std::string reason) {
    ++result.skipped_lines;
    result.diagnostics.push_back({line_no, std::move(reason)});
  };
  const auto close = [&](bool complete) {
    open->complete = complete;
    finish_snapshot(*open);
    result.snapshots.push_back(std::move(*open));
    open.reset();
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '-') {
      const auto marker = collapse_blanks(line);
      if (marker == begin) {
        if (open) {
          result.diagnostics.push_back(
              {open_line, "block has no end marker before next begin marker"});
          close(false);
        }
        open.emplace();
        open->index = result.snapshots.size();
        open_line = line_no;
        continue;
      }
      if (marker == end) {
        if (open)
          close(true);
        else
          skip("end marker without matching begin marker");
        continue;
      }
    }

    if (!open) {
      skip("text outside a statistics block");
      continue;
    }

    auto body = line;
    if (auto hash = body.find('#'); hash != std::string_view::npos)
      body = trim(body.substr(0, hash));
    const auto tokens = split_tokens(body);
    if (tokens.size() != 2) {
      skip("expected '<key> <value>', found " + std::to_string(tokens.size()) +
           " fields");
      continue;
    }
    double value = 0.0;
    if (!parse_value(tokens[1], value)) {
      skip("unusable value '" + std::string(tokens[1]) + "' for " +
           std::string(tokens[0]));
      continue;
    }
    auto [it, inserted] = open->entries.emplace(std::string(tokens[0]), value);
    if (!inserted) skip("duplicate key " + std::string(tokens[0]));
  }

  if (open) {
    result.truncated = true;
    result.diagnostics.push_back({open_line, "unterminated statistics block"});
    close(false);
  }
  return result;
}

ParseResult parse_stats_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_stats_stream(in);
}

std::string serialize(const std::vector<StatsSnapshot>& snapshots) {
  std::string out;
  for (const auto& snap : snapshots) {
    out += kBeginMarker;
    out += "\n\n";
    for (const auto& [key, value] : snap.entries) {
      out += key;
      out += ' ';
      out += format_double(value);
      out += '\n';
    }
    out += '\n';
    if (snap.complete) {
      out += kEndMarker;
      out += "\n\n";
    }
  }
  return out;
}

std::string KeyTemplate::resolve(std::size_t core_id) const {
  auto pos = pattern.find(kPlaceholder);
  if (pos == std::string::npos) return pattern;
  return pattern.substr(0, pos) + std::to_string(core_id) +
         pattern.substr(pos + kPlaceholder.size());
}

bool KeyTemplate::matches(std::string_view key) const {
  auto pos = pattern.find(kPlaceholder);
  if (pos == std::string::npos) return key == pattern;
  const std::string_view prefix(pattern.data(), pos);
  const std::string_view suffix(pattern.data() + pos + kPlaceholder.size(),
                                pattern.size() - pos - kPlaceholder.size());
  if (key.size() <= prefix.size() + suffix.size()) return false;
  if (!key.starts_with(prefix) || !key.ends_with(suffix)) return false;
  const auto digits = key.substr(prefix.size(), key.size() - prefix.size() - suffix.size());
  for (char c : digits)
    if (c < '0' || c > '9') return false;
  return true;
}

std::vector<const KeyTemplate*> CoreKeyMap::all() const {
  return {&ipc, &dcache_misses, &dcache_accesses, &fetch_count, &l2_accesses};
}

bool CoreKeyMap::is_counter(std::string_view key) const {
  for (const auto* t : all())
    if (t->counter && t->matches(key)) return true;
  return false;
}

CoreExtraction extract_core_metrics(const StatsSnapshot& snapshot, std::size_t core_id,
                                    const CoreKeyMap& keymap) {
  if (!snapshot.has_sim_seconds)
    throw DataError("snapshot " + std::to_string(snapshot.index) + " has no simSeconds");
  if (!(snapshot.sim_seconds > 0.0))
    throw DataError("snapshot " + std::to_string(snapshot.index) +
                    " has non-positive simSeconds");

  CoreExtraction out;
  const auto read = [&](const KeyTemplate& t) {
    const auto key = t.resolve(core_id);
    auto it = snapshot.entries.find(key);
    if (it == snapshot.entries.end()) {
      out.diagnostics.push_back({0, "snapshot " + std::to_string(snapshot.index) +
                                        " core " + std::to_string(core_id) +
                                        ": missing " + key + ", using 0"});
      return 0.0;
    }
    return it->second;
  };
  // Counters can come out slightly negative after differencing a stream
  // with a reset; clamp them so the sample stays valid.
  const auto count = [&](const KeyTemplate& t) {
    const double v = read(t);
    return v > 0.0 ? static_cast<std::uint64_t>(std::llround(v)) : std::uint64_t{0};
  };

  auto& s = out.sample;
  s.sim_seconds = snapshot.sim_seconds;
  s.ipc = std::max(0.0, read(keymap.ipc));
  s.dcache_overall_misses = count(keymap.dcache_misses);
  s.dcache_overall_accesses = count(keymap.dcache_accesses);
  const double fetched = std::max(0.0, read(keymap.fetch_count));
  s.l2_overall_accesses = count(keymap.l2_accesses);
  s.fetch_rate = fetched / s.sim_seconds;

  if (s.dcache_overall_misses > s.dcache_overall_accesses) {
    out.diagnostics.push_back({0, "snapshot " + std::to_string(snapshot.index) +
                                      " core " + std::to_string(core_id) +
                                      ": misses exceed accesses, clamping"});
    s.dcache_overall_accesses = s.dcache_overall_misses;
  }

  out.metrics.ipc = s.ipc;
  out.metrics.cache_miss_rate =
      sched::miss_rate(s.dcache_overall_misses, s.dcache_overall_accesses);
  out.metrics.fetch_rate = s.fetch_rate;
  return out;
}

StatsSnapshot delta_snapshots(const StatsSnapshot& a, const StatsSnapshot& b,
                              const CoreKeyMap& keymap) {
  if (!(b.index > a.index))
    throw std::invalid_argument("delta_snapshots: second snapshot must come later");
  const double window = b.sim_seconds - a.sim_seconds;
  if (!(window > 0.0))
    throw DataError("delta_snapshots: simSeconds does not advance between dumps " +
                    std::to_string(a.index) + " and " + std::to_string(b.index));

  StatsSnapshot out;
  out.index = b.index;
  out.complete = b.complete;
  for (const auto& [key, value] : b.entries) {
    if (key == kSimSecondsKey) continue;
    if (keymap.is_counter(key)) {
      auto it = a.entries.find(key);
      out.entries.emplace(key, it == a.entries.end() ? value : value - it->second);
    } else {
      out.entries.emplace(key, value);
    }
  }
  out.entries.emplace(std::string(kSimSecondsKey), window);
  out.sim_seconds = window;
  out.has_sim_seconds = true;
  return out;
}

}  // namespace theas::stats
