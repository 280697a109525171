#include "framebeat/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "framebeat/error.hpp"

namespace framebeat {

std::string to_string(SwapReason reason) {
  switch (reason) {
    case SwapReason::PreviewMix: return "preview_mix";
    case SwapReason::Mastered: return "mastered";
    case SwapReason::Manual: return "manual";
  }
  return "manual";
}

bool parse_swap_reason(std::string_view text, SwapReason& out) {
  if (text == "preview_mix") out = SwapReason::PreviewMix;
  else if (text == "mastered") out = SwapReason::Mastered;
  else if (text == "manual") out = SwapReason::Manual;
  else return false;
  return true;
}

// ---------------------------------------------------------------------------
// Program

namespace {
constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

float blend(double g_out, float out, double g_in, float in) {
  return static_cast<float>(std::clamp(g_out * out + g_in * in, -1.0, 1.0));
}
}  // namespace

std::int64_t Program::frames_of(const Placement& pl) const {
  return static_cast<std::int64_t>(slots[pl.section].buffer->frames());
}

std::int64_t Program::end_sample() const {
  if (placements.empty()) return 0;
  const Placement& last = placements.back();
  return to_samples(last.start + slots[last.section].length);
}

Program::Placement Program::placement_at(std::size_t i) const {
  if (i < placements.size()) return placements[i];
  const Placement& last = placements.back();
  const auto repeat = static_cast<std::int64_t>(i - (placements.size() - 1));
  Placement pl;
  pl.section = last.section;
  pl.start = last.start + Time(repeat) * (slots[last.section].length - crossfade);
  pl.start_sample = to_samples(pl.start);
  return pl;
}

std::size_t Program::locate(std::int64_t p) const {
  const Placement& last = placements.back();
  if (p < last.start_sample) {
    auto it = std::upper_bound(placements.begin(), placements.end(), p,
                               [](std::int64_t v, const Placement& pl) { return v < pl.start_sample; });
    return static_cast<std::size_t>(std::distance(placements.begin(), it)) - 1;
  }
  // Past the last explicit placement the last section repeats on itself.
  const double period = to_seconds(slots[last.section].length - crossfade) * kSampleRate;
  auto i = placements.size() - 1 +
           static_cast<std::size_t>(std::max(0.0, std::floor(static_cast<double>(p - last.start_sample) / period)));
  while (i > placements.size() - 1 && placement_at(i).start_sample > p) --i;
  while (placement_at(i + 1).start_sample <= p) ++i;
  return i;
}

void Program::resolve_swap_end(Swap& swap) const {
  swap.end_sample = kNever;
  swap.end_window = 0;
  if (placements.empty()) return;
  const std::size_t horizon = placements.size() + 2;
  for (std::size_t i = 0; i < horizon; ++i) {
    const Placement pl = placement_at(i);
    if (pl.section < swap.covers_sections) continue;
    if (pl.start_sample + frames_of(pl) <= swap.boundary_sample) continue;
    swap.end_sample = pl.start_sample;
    swap.end_section = pl.section;
    if (i > 0) {
      const Placement prev = placement_at(i - 1);
      swap.end_window = std::max<std::int64_t>(0, prev.start_sample + frames_of(prev) - pl.start_sample);
    }
    return;
  }
}

Program::Frame Program::arrangement(std::int64_t p) const {
  if (placements.empty() || p < 0) return {};
  const std::size_t i = locate(p);
  const Placement cur = placement_at(i);
  const AudioBuffer& x = *slots[cur.section].buffer;
  const std::int64_t n = p - cur.start_sample;
  if (n >= static_cast<std::int64_t>(x.frames())) return {};
  Frame f{x.at(0, static_cast<std::size_t>(n)), x.at(1, static_cast<std::size_t>(n))};
  if (i == 0) return f;
  const Placement prev = placement_at(i - 1);
  const std::int64_t prev_end = prev.start_sample + frames_of(prev);
  if (p >= prev_end) return f;
  const AudioBuffer& y = *slots[prev.section].buffer;
  const auto window = static_cast<std::size_t>(prev_end - cur.start_sample);
  const Gains g = envelope_gains(slots[cur.section].family, static_cast<std::size_t>(n), window);
  const auto m = static_cast<std::size_t>(p - prev.start_sample);
  return {blend(g.out, y.at(0, m), g.in, f.l), blend(g.out, y.at(1, m), g.in, f.r)};
}

Program::Frame Program::replacement(const Swap& swap, std::int64_t p) const {
  const std::int64_t phase = (p - swap.boundary_sample + swap.phase_offset) % swap.loop_frames;
  const auto m = static_cast<std::size_t>(phase);
  return {swap.replacement->at(0, m), swap.replacement->at(1, m)};
}

Program::Frame Program::layer(std::int64_t p, std::size_t active) const {
  if (active == 0) return arrangement(p);
  const Swap& swap = swaps[active - 1];
  if (swap.end_sample <= swap.boundary_sample) return layer(p, active - 1);

  if (p >= swap.end_sample) {
    const std::int64_t n = p - swap.end_sample;
    if (n >= swap.end_window) return arrangement(p);
    const Frame r = replacement(swap, p);
    const Placement incoming = placement_at(locate(p));
    const AudioBuffer& y = *slots[incoming.section].buffer;
    const auto m = static_cast<std::size_t>(p - incoming.start_sample);
    const Gains g = envelope_gains(slots[swap.end_section].family, static_cast<std::size_t>(n),
                                   static_cast<std::size_t>(swap.end_window));
    return {blend(g.out, r.l, g.in, y.at(0, m)), blend(g.out, r.r, g.in, y.at(1, m))};
  }

  const Frame r = replacement(swap, p);
  const std::int64_t n = p - swap.boundary_sample;
  if (n >= window_samples) return r;
  const Frame prev = layer(p, active - 1);
  // Fading between identical samples is the identity; this keeps a swap to
  // bit-identical material bit-exact.
  if (prev.l == r.l && prev.r == r.r) return r;
  const Gains g = envelope_gains(EnvelopeFamily::equal_power(), static_cast<std::size_t>(n),
                                 static_cast<std::size_t>(window_samples));
  return {blend(g.out, prev.l, g.in, r.l), blend(g.out, prev.r, g.in, r.r)};
}

Program::Frame Program::sample(std::int64_t p) const {
  auto it = std::upper_bound(swaps.begin(), swaps.end(), p,
                             [](std::int64_t v, const Swap& s) { return v < s.boundary_sample; });
  return layer(p, static_cast<std::size_t>(std::distance(swaps.begin(), it)));
}

void Program::render(std::int64_t start, std::span<float> left, std::span<float> right) const {
  const std::size_t frames = std::min(left.size(), right.size());
  for (std::size_t i = 0; i < frames; ++i) {
    const Frame f = sample(start + static_cast<std::int64_t>(i));
    left[i] = f.l;
    right[i] = f.r;
  }
}

AudioBuffer Program::render(std::int64_t start, std::size_t frames) const {
  AudioBuffer out(frames);
  render(start, out.channel(0), out.channel(1));
  return out;
}

// ---------------------------------------------------------------------------
// LoopEngine

LoopEngine::LoopEngine(EngineConfig config) : config_(config) {
  std::lock_guard lock(mutex_);
  publish_locked();
}

void LoopEngine::set_clock(const SessionClock& clock) {
  std::lock_guard lock(mutex_);
  if (clock_ && !(*clock_ == clock)) throw Error(ErrorCode::InvalidState, "session tempo is locked");
  clock_ = clock;
  publish_locked();
}

std::optional<SessionClock> LoopEngine::clock() const {
  std::lock_guard lock(mutex_);
  return clock_;
}

Time LoopEngine::crossfade() const {
  std::lock_guard lock(mutex_);
  if (!clock_) throw Error(ErrorCode::InvalidState, "no session tempo");
  return crossfade_window(*clock_);
}

ScheduledSection LoopEngine::append_section(const SectionDraft& draft, std::optional<Time> start) {
  std::lock_guard lock(mutex_);
  if (!clock_) throw Error(ErrorCode::InvalidState, "append_section before the tempo is locked");
  if (!draft.buffer || draft.buffer->empty()) throw Error(ErrorCode::InvalidState, "section has no audio");
  if (draft.buffer->sample_rate() != kSampleRate) throw Error(ErrorCode::ContractViolation, "section not at 44.1 kHz");
  if (draft.bar_count < 1) throw Error(ErrorCode::ClipShorterThanBar, "section needs at least one bar");

  const Time cf = crossfade_window(*clock_);
  ScheduledSection s;
  s.index = sections_.size();
  s.capture_index = draft.capture_index;
  s.bar_count = draft.bar_count;
  s.length = Time(draft.bar_count) * clock_->bar();
  s.buffer = draft.buffer;
  s.role = draft.role;
  s.crossfade = draft.crossfade;
  s.prompt = draft.prompt;
  if (static_cast<std::int64_t>(draft.buffer->frames()) != to_samples(s.length)) {
    throw Error(ErrorCode::ContractViolation, "section buffer is not truncated to whole bars");
  }
  if (!(cf < s.length)) throw Error(ErrorCode::CrossfadeLongerThanSection, "section shorter than its crossfade");

  if (sections_.empty()) {
    if (start && *start != Time(0)) throw Error(ErrorCode::InvalidState, "first section must start at 0");
    s.start_time = Time(0);
  } else {
    const Program::Placement last = placements_.back();
    const ScheduledSection& prev = sections_[last.section];
    NextStart next = schedule_next(last.start, prev.length, cf, *clock_);
    const std::int64_t earliest = playhead() + to_samples(config_.look_ahead);
    auto needs_repeat = [&](const Time& t) {
      return start ? t < *start : to_samples(t) < earliest;
    };
    while (needs_repeat(next.nominal)) {
      placements_.push_back({last.section, next.nominal, to_samples(next.nominal)});
      next = schedule_next(next.nominal, prev.length, cf, *clock_);
    }
    if (start && next.nominal != *start) {
      throw Error(ErrorCode::InvalidState, "recorded start " + to_string(*start) + " is off the section chain");
    }
    s.start_time = next.nominal;
  }
  s.downbeat = quantize_to_bar(s.start_time, *clock_);
  placements_.push_back({s.index, s.start_time, to_samples(s.start_time)});
  sections_.push_back(s);
  publish_locked();
  return s;
}

std::vector<ScheduledSection> LoopEngine::sections() const {
  std::lock_guard lock(mutex_);
  return sections_;
}

SwapTicket LoopEngine::insert_swap_locked(const HotSwapRequest& request, const Time& boundary) {
  if (!clock_) throw Error(ErrorCode::InvalidState, "hot-swap before the tempo is locked");
  if (!request.replacement || request.replacement->empty()) throw Error(ErrorCode::InvalidSwap, "empty replacement");
  if (request.replacement->sample_rate() != kSampleRate) {
    throw Error(ErrorCode::InvalidSwap, "replacement must be 44.1 kHz");
  }
  const std::int64_t now = playhead();
  for (auto& [id, pending] : swaps_) {
    if (pending.status != SwapStatus::Pending) continue;
    if (to_samples(pending.ticket.boundary) <= now) {
      pending.status = SwapStatus::Committed;
    } else if (pending.request.reason == request.reason) {
      pending.status = SwapStatus::Superseded;
    }
  }
  PendingSwap entry;
  entry.ticket = {next_swap_id_++, boundary};
  entry.request = request;
  swaps_.emplace(entry.ticket.id, entry);
  publish_locked();
  return entry.ticket;
}

SwapTicket LoopEngine::request_hot_swap(const HotSwapRequest& request) {
  std::lock_guard lock(mutex_);
  if (!clock_) throw Error(ErrorCode::InvalidState, "hot-swap before the tempo is locked");
  const Time now = playhead_time();
  const Time earliest = (request.earliest_time > now ? request.earliest_time : now) + config_.look_ahead;
  return insert_swap_locked(request, next_bar_at_or_after(earliest, *clock_));
}

SwapTicket LoopEngine::schedule_hot_swap_at(const HotSwapRequest& request, const Time& boundary) {
  std::lock_guard lock(mutex_);
  if (!clock_ || !is_bar_aligned(boundary, *clock_)) {
    throw Error(ErrorCode::InvalidSwap, "swap boundary must sit on the bar grid");
  }
  return insert_swap_locked(request, boundary);
}

SwapStatus LoopEngine::swap_status(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  auto it = swaps_.find(id);
  if (it == swaps_.end()) throw Error(ErrorCode::InvalidSwap, "unknown swap " + std::to_string(id));
  if (it->second.status == SwapStatus::Pending && to_samples(it->second.ticket.boundary) <= playhead()) {
    return SwapStatus::Committed;
  }
  return it->second.status;
}

Time LoopEngine::swap_result(std::uint64_t id) const {
  const SwapStatus status = swap_status(id);
  std::lock_guard lock(mutex_);
  const auto& entry = swaps_.at(id);
  if (status == SwapStatus::Superseded) {
    throw Error(ErrorCode::SwapSuperseded, "swap " + std::to_string(id) + " (" + to_string(entry.request.reason) +
                                               ") was replaced by a newer request");
  }
  return entry.ticket.boundary;
}

std::vector<SwapCommit> LoopEngine::poll_commits() {
  std::lock_guard lock(mutex_);
  std::vector<SwapCommit> out;
  const std::int64_t now = playhead();
  for (auto& [id, pending] : swaps_) {
    if (pending.status == SwapStatus::Pending && to_samples(pending.ticket.boundary) <= now) {
      pending.status = SwapStatus::Committed;
    }
    if (pending.status == SwapStatus::Committed && !pending.reported) {
      pending.reported = true;
      out.push_back({pending.ticket, pending.request.reason, pending.request.covers_sections,
                     fingerprint(*pending.request.replacement)});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SwapCommit& a, const SwapCommit& b) { return a.ticket.boundary < b.ticket.boundary; });
  return out;
}

Program::Swap LoopEngine::make_swap_locked(const PendingSwap& pending) const {
  Program::Swap swap;
  swap.id = pending.ticket.id;
  swap.boundary_sample = to_samples(pending.ticket.boundary);
  swap.replacement = pending.request.replacement;
  swap.covers_sections = pending.request.covers_sections;
  const Time bar = clock_->bar();
  const auto frames = static_cast<std::int64_t>(swap.replacement->frames());
  const Time whole = from_samples(frames) / bar;
  const std::int64_t bars = whole.numerator() / whole.denominator();
  if (bars >= 1) {
    swap.loop_frames = to_samples(Time(bars) * bar);
    const Time bar_index = pending.ticket.boundary / bar;
    const std::int64_t phase_bar = (bar_index.numerator() / bar_index.denominator()) % bars;
    swap.phase_offset = to_samples(Time(phase_bar) * bar);
  } else {
    swap.loop_frames = frames;
    swap.phase_offset = 0;
  }
  swap.loop_frames = std::min(swap.loop_frames, frames);
  return swap;
}

void LoopEngine::publish_locked() {
  auto program = std::make_shared<Program>();
  program->clock = clock_;
  if (clock_) {
    program->crossfade = crossfade_window(*clock_);
    program->window_samples = to_samples(program->crossfade);
  }
  for (const auto& s : sections_) program->slots.push_back({s.buffer, s.crossfade.family, s.length});
  program->placements = placements_;
  for (const auto& [id, pending] : swaps_) {
    if (pending.status == SwapStatus::Superseded) continue;
    Program::Swap swap = make_swap_locked(pending);
    program->resolve_swap_end(swap);
    program->swaps.push_back(swap);
  }
  std::stable_sort(program->swaps.begin(), program->swaps.end(),
                   [](const Program::Swap& a, const Program::Swap& b) { return a.boundary_sample < b.boundary_sample; });
  std::atomic_store(&snapshot_, std::shared_ptr<const Program>(std::move(program)));
}

std::shared_ptr<const Program> LoopEngine::snapshot() const { return std::atomic_load(&snapshot_); }

RenderStats LoopEngine::render(std::span<float> left, std::span<float> right) {
  const auto started = std::chrono::steady_clock::now();
  const auto program = snapshot();
  const std::size_t frames = std::min(left.size(), right.size());
  RenderStats stats;
  stats.frames = frames;
  if (!program->playing()) {
    std::fill(left.begin(), left.end(), 0.0f);
    std::fill(right.begin(), right.end(), 0.0f);
    return stats;
  }
  const std::int64_t start = playhead_.load();
  program->render(start, left.first(frames), right.first(frames));
  playhead_.store(start + static_cast<std::int64_t>(frames));
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (elapsed > static_cast<double>(frames) / kSampleRate) {
    stats.underrun = true;
    underruns_.fetch_add(1);
  }
  return stats;
}

void LoopEngine::advance(std::int64_t frames) {
  if (snapshot()->playing()) playhead_.fetch_add(frames);
}

AudioBuffer LoopEngine::render_session() const {
  const auto program = snapshot();
  return program->render(0, static_cast<std::size_t>(program->end_sample()));
}

AudioBuffer LoopEngine::render_arrangement(std::size_t placement_count) const {
  auto program = std::make_shared<Program>(*snapshot());
  program->swaps.clear();
  if (placement_count == 0 || placement_count > program->placements.size()) {
    throw Error(ErrorCode::InvalidState, "arrangement has " + std::to_string(program->placements.size()) +
                                             " placements, asked for " + std::to_string(placement_count));
  }
  program->placements.resize(placement_count);
  return program->render(0, static_cast<std::size_t>(program->end_sample()));
}

std::size_t LoopEngine::placement_count() const {
  std::lock_guard lock(mutex_);
  return placements_.size();
}

}  // namespace framebeat
