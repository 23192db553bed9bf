#include <gtest/gtest.h>

#include "qmitm/kernel.hpp"

using namespace qmitm;

TEST(Kernel, EqualDueTimesRunInInsertionOrder) {
  Kernel k;
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) k.schedule(Tick{5}, Party::alice, "e", [&order, i] { order.push_back(i); });
  k.run_until_idle();
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Kernel, CurrentTimeRunsBeforeNextTick) {
  Kernel k;
  std::vector<std::string> order;
  k.schedule(Tick{1}, Party::alice, "a", [&] {
    k.schedule(Tick{2}, Party::bob, "later", [&] { order.push_back("later"); });
    k.schedule(Tick{1}, Party::bob, "now", [&] { order.push_back("now"); });
  });
  k.run_until_idle();
  EXPECT_EQ(order, (std::vector<std::string>{"now", "later"}));
}

TEST(Kernel, SchedulingInThePastThrows) {
  Kernel k;
  bool thrown = false;
  k.schedule(Tick{10}, Party::alice, "a", [&] {
    try {
      k.schedule(Tick{9}, Party::alice, "past", [] {});
    } catch (const SchedulingError&) {
      thrown = true;
    }
  });
  k.run_until_idle();
  EXPECT_TRUE(thrown);
}

TEST(Kernel, RunWithoutEventsThrows) {
  Kernel k;
  EXPECT_THROW(k.run_until_idle(), SchedulingError);
}

TEST(Kernel, EventLimitAbortsRunaway) {
  Kernel k{ClockModel::perfect(), 0, 100};
  std::function<void()> loop = [&] { k.schedule(k.now() + Tick{1}, Party::alice, "loop", loop); };
  k.schedule(Tick{0}, Party::alice, "loop", loop);
  EXPECT_THROW(k.run_until_idle(), EventLimitError);
}

TEST(Kernel, TranscriptLengthMatchesEventCountWithoutFollowUps) {
  Kernel k;
  for (int i = 0; i < 17; ++i)
    k.schedule(Tick{i % 4}, Party::bob, "r", [&k] {
      TranscriptRecord r;
      r.actor = Party::bob;
      r.kind = RecordKind::read;
      k.record(r);
    });
  EXPECT_EQ(k.run_until_idle().size(), 17u);
}

namespace {
std::string random_event_run(std::uint64_t seed, ClockModel clocks) {
  Kernel k{clocks, seed};
  Rng r{seed};
  for (int i = 0; i < 10000; ++i) {
    const Tick due{static_cast<std::int64_t>(r.uniform(5000))};
    const Party who = static_cast<Party>(r.uniform(3));
    const auto len = r.uniform(100);
    k.schedule(due, who, "rand", [&k, who, len] {
      TranscriptRecord rec;
      rec.actor = who;
      rec.channel = ChannelKind::classical;
      rec.from = who;
      rec.to = counterpart(who);
      rec.payload_len = len;
      rec.digest = len * 31;
      k.record(rec);
    });
  }
  return k.run_until_idle().to_csv();
}
}  // namespace

TEST(Kernel, TenThousandRandomEventsAreDeterministic) {
  const auto clocks = ClockModel::gps_jitter(Tick{3});
  const std::string a = random_event_run(11, clocks);
  EXPECT_EQ(a, random_event_run(11, clocks));
  EXPECT_NE(a, random_event_run(12, clocks));
}

TEST(Kernel, TranscriptRejectsOutOfOrderAppend) {
  Transcript t;
  TranscriptRecord r;
  r.tick = Tick{5};
  t.append(r);
  r.tick = Tick{4};
  EXPECT_THROW(t.append(r), std::logic_error);
}

TEST(Kernel, TranscriptCsvHeaderNamesEveryColumn) {
  Kernel k;
  k.schedule(Tick{3}, Party::alice, "p", [&k] { k.mark_phase(Party::alice, 2); });
  const auto csv = k.run_until_idle().to_csv();
  EXPECT_EQ(csv,
            "tick,actor,channel,direction,kind,payload_len,digest_hex16,slot_index,phase,local_tick\n"
            "3,alice,none,,phase,0,0000000000000000,,2,3\n");
}

TEST(Clock, PerfectIsIdentity) {
  Rng r{1};
  for (std::int64_t g : {0, 100, 12345})
    for (Party p : {Party::alice, Party::bob, Party::eve})
      EXPECT_EQ(local_time(p, ClockModel::perfect(), Tick{g}, r), Tick{g});
}

TEST(Clock, GpsJitterStaysInBound) {
  Rng r{1};
  const auto m = ClockModel::gps_jitter(Tick{3});
  bool saw_low = false, saw_high = false;
  for (int i = 0; i < 10000; ++i) {
    const Tick t = local_time(Party::bob, m, Tick{1000}, r);
    EXPECT_GE(t, Tick{997});
    EXPECT_LE(t, Tick{1003});
    saw_low = saw_low || t == Tick{997};
    saw_high = saw_high || t == Tick{1003};
  }
  EXPECT_TRUE(saw_low && saw_high);
}

TEST(Clock, UnsynchronizedAddsFixedOffset) {
  Rng r{1};
  const auto m = ClockModel::unsynchronized({{Party::alice, Tick{0}}, {Party::bob, Tick{50}}});
  EXPECT_EQ(local_time(Party::alice, m, Tick{100}, r), Tick{100});
  EXPECT_EQ(local_time(Party::bob, m, Tick{100}, r), Tick{150});
  PartyClock bob{Party::bob, m, Rng{2}};
  EXPECT_EQ(bob.global_for(Tick{150}), Tick{100});
}

TEST(Clock, PartyClockIsMonotoneAndWithinBound) {
  const auto m = ClockModel::gps_jitter(Tick{3});
  PartyClock c{Party::alice, m, Rng{8}};
  Tick last{-100};
  for (std::int64_t g = 0; g < 2000; ++g)
    for (int rep = 0; rep < 3; ++rep) {
      const Tick t = c.read(Tick{g});
      EXPECT_GE(t, last);
      EXPECT_LE(t, Tick{g + 3});
      EXPECT_GE(t, Tick{g - 3});
      last = t;
    }
}

TEST(Clock, ValidationRejectsInconsistentModels) {
  ClockModel bad = ClockModel::perfect();
  bad.jitter_bound = Tick{1};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(ClockModel::gps_jitter(Tick{-1}).validate(), std::invalid_argument);
  ClockModel gps = ClockModel::gps_jitter(Tick{2});
  gps.offsets[Party::bob] = Tick{4};
  EXPECT_THROW(gps.validate(), std::invalid_argument);
}
