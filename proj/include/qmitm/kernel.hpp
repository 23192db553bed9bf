#pragma once

// Discrete-event kernel, the run transcript, and the clock-synchronization
// model. Global time lives only in the kernel; parties stamp what they see
// with their local clock readings.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmitm/core.hpp"

namespace qmitm {

enum class ChannelKind : std::uint8_t { none, quantum, classical, classical_aux };

constexpr std::string_view to_string(ChannelKind c) {
  switch (c) {
    case ChannelKind::none: return "none";
    case ChannelKind::quantum: return "quantum";
    case ChannelKind::classical: return "classical";
    case ChannelKind::classical_aux: return "classical_aux";
  }
  return "?";
}

enum class RecordKind : std::uint8_t {
  deliver,  // a send completed at its receiver (or at the tap that captured it)
  read,     // passive tap copy
  measure,  // terminal measurement of a qubit
  phase,    // protocol phase mark
  forward,  // adversary emits a packet carrying a faithful copy
  timeout,  // party gave up waiting for an expected packet
};

constexpr std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::deliver: return "deliver";
    case RecordKind::read: return "read";
    case RecordKind::measure: return "measure";
    case RecordKind::phase: return "phase";
    case RecordKind::forward: return "forward";
    case RecordKind::timeout: return "timeout";
  }
  return "?";
}

struct TranscriptRecord {
  Tick tick;        // global
  Tick local_tick;  // actor's clock reading at `tick`
  Party actor = Party::alice;
  ChannelKind channel = ChannelKind::none;
  Party from = Party::alice;
  Party to = Party::alice;
  RecordKind kind = RecordKind::deliver;
  std::size_t payload_len = 0;
  std::uint64_t digest = 0;
  std::optional<int> slot;
  std::optional<int> phase;
};

/// Append-only, ordered by global tick (ties by append order).
class Transcript {
 public:
  std::size_t append(TranscriptRecord r) {
    if (!records_.empty() && r.tick < records_.back().tick)
      throw std::logic_error("Transcript: record out of global time order");
    records_.push_back(r);
    return records_.size() - 1;
  }

  const std::vector<TranscriptRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const TranscriptRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::size_t count(RecordKind kind, ChannelKind channel = ChannelKind::none) const {
    std::size_t n = 0;
    for (const auto& r : records_)
      n += (r.kind == kind && (channel == ChannelKind::none || r.channel == channel));
    return n;
  }

  static constexpr const char* csv_header =
      "tick,actor,channel,direction,kind,payload_len,digest_hex16,slot_index,phase,local_tick";

  void write_csv(std::ostream& os) const {
    os << csv_header << '\n';
    for (const auto& r : records_) {
      os << r.tick.value << ',' << to_string(r.actor) << ',' << to_string(r.channel) << ',';
      if (r.channel != ChannelKind::none) os << to_string(r.from) << '>' << to_string(r.to);
      os << ',' << to_string(r.kind) << ',' << r.payload_len << ',' << hex16(r.digest) << ',';
      if (r.slot) os << *r.slot;
      os << ',';
      if (r.phase) os << *r.phase;
      os << ',' << r.local_tick.value << '\n';
    }
  }

  std::string to_csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }

 private:
  std::vector<TranscriptRecord> records_;
};

enum class ClockMode : std::uint8_t { perfect, gps_jitter, unsynchronized };

constexpr std::string_view to_string(ClockMode m) {
  switch (m) {
    case ClockMode::perfect: return "perfect";
    case ClockMode::gps_jitter: return "gps_jitter";
    case ClockMode::unsynchronized: return "unsynchronized";
  }
  return "?";
}

struct ClockModel {
  ClockMode mode = ClockMode::perfect;
  Tick jitter_bound{0};
  // Fixed per-party offsets; only meaningful when unsynchronized.
  std::map<Party, Tick> offsets;

  static ClockModel perfect() { return {}; }
  static ClockModel gps_jitter(Tick bound) { return {ClockMode::gps_jitter, bound, {}}; }
  static ClockModel unsynchronized(std::map<Party, Tick> offsets) {
    return {ClockMode::unsynchronized, Tick{0}, std::move(offsets)};
  }

  Tick fixed_offset(Party p) const {
    if (mode != ClockMode::unsynchronized) return Tick{0};
    auto it = offsets.find(p);
    return it == offsets.end() ? Tick{0} : it->second;
  }

  void validate() const {
    if (jitter_bound < Tick{0}) throw std::invalid_argument("clock model: jitter bound must be >= 0");
    if (mode == ClockMode::perfect && (jitter_bound != Tick{0} || !offsets.empty()))
      throw std::invalid_argument("clock model: perfect clocks carry no offset or jitter");
    if (mode == ClockMode::gps_jitter && !offsets.empty())
      throw std::invalid_argument("clock model: gps_jitter clocks carry no fixed offsets");
  }
};

/// One clock reading. gps_jitter draws a fresh offset in [-bound, +bound]
/// per reading; unsynchronized adds the party's fixed offset.
inline Tick local_time(Party party, const ClockModel& model, Tick global, Rng& rng) {
  switch (model.mode) {
    case ClockMode::perfect: return global;
    case ClockMode::gps_jitter:
      return global + Tick{rng.uniform_range(-model.jitter_bound.value, model.jitter_bound.value)};
    case ClockMode::unsynchronized: return global + model.fixed_offset(party);
  }
  return global;
}

/// A party's clock: jittered readings clamped so they never run backwards.
/// The clamp keeps each reading within the jitter bound because the previous
/// reading was itself within bound of an earlier global time.
class PartyClock {
 public:
  PartyClock(Party party, const ClockModel& model, Rng rng)
      : party_(party), model_(&model), rng_(rng) {}

  Tick read(Tick global) {
    Tick t = local_time(party_, *model_, global, rng_);
    if (last_ && t < *last_) t = *last_;
    last_ = t;
    return t;
  }

  // Global time at which this party's schedule reaches local time `local`.
  // Scheduling follows the disciplined clock; jitter affects readings only.
  Tick global_for(Tick local) const { return local - model_->fixed_offset(party_); }

 private:
  Party party_;
  const ClockModel* model_;
  Rng rng_;
  std::optional<Tick> last_;
};

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EventLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Event {
  Tick due;
  Party actor = Party::alice;
  std::string tag;
  std::uint64_t sequence = 0;
};

struct EventHandle {
  std::uint64_t sequence = 0;
};

class Kernel {
 public:
  using Action = std::function<void()>;

  explicit Kernel(ClockModel clocks = {}, std::uint64_t clock_seed = 0,
                  std::size_t max_events = 50'000'000)
      : clocks_(std::move(clocks)), max_events_(max_events) {
    clocks_.validate();
    const Rng base{clock_seed};
    for (Party p : {Party::alice, Party::bob, Party::eve})
      party_clocks_.emplace(p, PartyClock{p, clocks_, base.split(streams::of(p))});
  }

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  Tick now() const { return now_; }
  const ClockModel& clocks() const { return clocks_; }
  PartyClock& clock(Party p) { return party_clocks_.at(p); }
  Tick read_clock(Party p) { return clock(p).read(now_); }

  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }

  EventHandle schedule(Tick due, Party actor, std::string tag, Action action) {
    if (due < now_)
      throw SchedulingError("schedule: event '" + tag + "' due at " + std::to_string(due.value) +
                            " is before current time " + std::to_string(now_.value));
    const std::uint64_t seq = next_sequence_++;
    queue_.push(Pending{Event{due, actor, std::move(tag), seq}, std::move(action)});
    return EventHandle{seq};
  }

  std::size_t pending() const { return queue_.size(); }
  std::size_t executed() const { return executed_; }

  // Runs one event; returns false when the queue is empty.
  bool step() {
    if (queue_.empty()) return false;
    if (executed_ >= max_events_)
      throw EventLimitError("run_until_idle: exceeded " + std::to_string(max_events_) +
                            " events; last tag '" + queue_.top().event.tag + "' at tick " +
                            std::to_string(queue_.top().event.due.value));
    Pending p = queue_.top();
    queue_.pop();
    now_ = p.event.due;
    ++executed_;
    p.action();
    return true;
  }

  const Transcript& run_until_idle() {
    if (queue_.empty() && executed_ == 0)
      throw SchedulingError("run_until_idle: no events scheduled");
    while (step()) {
    }
    return transcript_;
  }

  // Appends a record stamped with the current global time and the actor's
  // local reading.
  std::size_t record(TranscriptRecord r) {
    r.tick = now_;
    r.local_tick = read_clock(r.actor);
    return transcript_.append(r);
  }

  std::size_t mark_phase(Party actor, int phase) {
    TranscriptRecord r;
    r.actor = actor;
    r.from = actor;
    r.to = actor;
    r.kind = RecordKind::phase;
    r.phase = phase;
    return record(r);
  }

 private:
  struct Pending {
    Event event;
    Action action;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.event.due != b.event.due) return a.event.due > b.event.due;
      return a.event.sequence > b.event.sequence;
    }
  };

  ClockModel clocks_;
  std::map<Party, PartyClock> party_clocks_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  Transcript transcript_;
  Tick now_{0};
  std::uint64_t next_sequence_ = 0;
  std::size_t executed_ = 0;
  std::size_t max_events_;
};

}  // namespace qmitm
