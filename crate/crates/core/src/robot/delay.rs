use std::collections::VecDeque;

use crate::clock::SimTime;

/// Fixed transport delay on a stream of values.
///
/// A value pushed at `t` becomes visible at `t + delay`; until the first value
/// matures the line reports its neutral value.
#[derive(Clone, Debug)]
pub struct DelayLine<T> {
    delay: SimTime,
    pending: VecDeque<(SimTime, T)>,
    current: T,
}

impl<T: Clone> DelayLine<T> {
    pub fn new(delay: SimTime, neutral: T) -> Self {
        Self {
            delay,
            pending: VecDeque::new(),
            current: neutral,
        }
    }

    pub fn delay(&self) -> SimTime {
        self.delay
    }

    /// Queues `value` as of time `at`. Insertion times must not decrease.
    pub fn push(&mut self, at: SimTime, value: T) {
        debug_assert!(self.pending.back().is_none_or(|(t, _)| *t <= at));
        self.pending.push_back((at, value));
    }

    /// Newest value inserted at or before `now - delay`. Queries must not go
    /// back in time.
    pub fn value_at(&mut self, now: SimTime) -> T {
        while let Some((t, _)) = self.pending.front() {
            if *t + self.delay > now {
                break;
            }
            let (_, v) = self.pending.pop_front().expect("front exists");
            self.current = v;
        }
        self.current.clone()
    }

    /// Drops everything still in flight and forces the visible value.
    pub fn reset(&mut self, value: T) {
        self.pending.clear();
        self.current = value;
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn value_matures_exactly_at_delay() {
        let mut line = DelayLine::new(ms(250), 0);
        line.push(ms(0), 7);
        assert_eq!(line.value_at(ms(249)), 0);
        assert_eq!(line.value_at(ms(250)), 7);
    }

    #[test]
    fn newest_matured_value_wins() {
        let mut line = DelayLine::new(ms(250), 0);
        line.push(ms(0), 1);
        line.push(ms(100), 2);
        line.push(ms(200), 3);
        assert_eq!(line.value_at(SimTime::from_micros(351_000)), 2);
        assert_eq!(line.value_at(ms(449)), 2);
        assert_eq!(line.value_at(ms(450)), 3);
        assert_eq!(line.in_flight(), 0);
    }

    #[test]
    fn zero_delay_is_transparent() {
        let mut line = DelayLine::new(SimTime::ZERO, 255u8);
        line.push(ms(10), 42);
        assert_eq!(line.value_at(ms(10)), 42);
    }
}
