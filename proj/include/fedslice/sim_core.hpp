#pragma once

// Deterministic discrete-event core: simulation clock, event queue and run
// loop. Every module in the simulator schedules onto this.
//
// Two rules make runs reproducible:
//   * events pop in (time, seq) order, where seq is the scheduling order;
//   * the clock only moves forward, to the time of the popped event.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedslice {

/// Simulation time in seconds. A thin wrapper so times and plain durations
/// do not mix silently.
struct SimTime {
    double seconds = 0.0;

    friend bool operator==(SimTime a, SimTime b) { return a.seconds == b.seconds; }
    friend bool operator!=(SimTime a, SimTime b) { return a.seconds != b.seconds; }
    friend bool operator<(SimTime a, SimTime b) { return a.seconds < b.seconds; }
    friend bool operator<=(SimTime a, SimTime b) { return a.seconds <= b.seconds; }
    friend bool operator>(SimTime a, SimTime b) { return a.seconds > b.seconds; }
    friend bool operator>=(SimTime a, SimTime b) { return a.seconds >= b.seconds; }

    friend SimTime operator+(SimTime t, double d) { return SimTime{t.seconds + d}; }
    friend double operator-(SimTime a, SimTime b) { return a.seconds - b.seconds; }
};

enum class EventKind {
    Arrival,
    GrantStart,
    GrantEnd,
    ComputeDone,
    BroadcastDone,
    RoundEnd,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::Arrival: return "arrival";
        case EventKind::GrantStart: return "grant-start";
        case EventKind::GrantEnd: return "grant-end";
        case EventKind::ComputeDone: return "compute-done";
        case EventKind::BroadcastDone: return "broadcast-done";
        case EventKind::RoundEnd: return "round-end";
    }
    return "?";
}

struct Event {
    SimTime time;
    std::uint64_t seq = 0;  // unique per run, assigned in scheduling order
    EventKind kind = EventKind::Arrival;
    std::int64_t subject = -1;  // client/onu/round index, depending on kind
};

struct SchedulingInPast : std::logic_error {
    using std::logic_error::logic_error;
};

/// Pending events ordered by (time, seq). Popping advances the clock.
class EventQueue {
public:
    std::uint64_t schedule(SimTime t, EventKind kind, std::int64_t subject = -1) {
        if (t < clock_)
            throw SchedulingInPast("schedule_event: t < current clock");
        Event ev{t, next_seq_++, kind, subject};
        heap_.push(ev);
        return ev.seq;
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    SimTime clock() const { return clock_; }

    /// Pops the least (time, seq) event and advances the clock to its time.
    /// Returns nullopt on an empty queue (clock unchanged).
    std::optional<Event> pop_next() {
        if (heap_.empty())
            return std::nullopt;
        Event ev = heap_.top();
        heap_.pop();
        clock_ = ev.time;
        return ev;
    }

    /// Processes all events with time <= t_stop through `handler`, in
    /// (time, seq) order. Handlers may schedule further events, including at
    /// the current time. The clock is t_stop on return.
    template <typename Handler>
    SimTime run_until(SimTime t_stop, Handler&& handler) {
        if (t_stop < clock_)
            throw SchedulingInPast("run_until: t_stop < current clock");
        while (!heap_.empty() && heap_.top().time <= t_stop) {
            Event ev = heap_.top();
            heap_.pop();
            clock_ = ev.time;
            handler(ev);
        }
        clock_ = t_stop;
        return clock_;
    }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time.seconds != b.time.seconds)
                return a.time.seconds > b.time.seconds;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    SimTime clock_{0.0};
    std::uint64_t next_seq_ = 0;
};

/// Formats one processed event as a trace line `time,seq,kind`; the
/// determinism tests compare whole trace logs byte for byte.
inline std::string trace_line(const Event& ev) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.9f,%llu,%s", ev.time.seconds,
                  static_cast<unsigned long long>(ev.seq), to_string(ev.kind));
    return buf;
}

}  // namespace fedslice
