//! Per-connection outbound queue. Push frames (STATE, MAP) are droppable:
//! when the queue is full the oldest droppable frame goes first. Replies and
//! events are never dropped.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use tokio::sync::Notify;

use crate::frame::Frame;

pub struct OutQueue {
    inner: Mutex<Inner>,
    notify: Notify,
    dropped: AtomicU32,
    capacity: usize,
}

struct Inner {
    frames: VecDeque<(Frame, bool)>,
    closed: bool,
}

impl OutQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(Inner { frames: VecDeque::new(), closed: false }),
            notify: Notify::new(),
            dropped: AtomicU32::new(0),
            capacity: capacity.max(1),
        }
    }

    /// Queues a reply or event.
    pub fn push(&self, frame: Frame) {
        self.enqueue(frame, false);
    }

    /// Queues a push frame that may be dropped under back-pressure.
    pub fn push_droppable(&self, frame: Frame) {
        self.enqueue(frame, true);
    }

    fn enqueue(&self, frame: Frame, droppable: bool) {
        {
            let mut q = self.inner.lock().unwrap();
            if q.closed {
                return;
            }
            if q.frames.len() >= self.capacity {
                if let Some(i) = q.frames.iter().position(|(_, d)| *d) {
                    q.frames.remove(i);
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                } else if droppable {
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                    return;
                }
            }
            q.frames.push_back((frame, droppable));
        }
        self.notify.notify_one();
    }

    /// Takes everything queued, waiting if empty. `None` once closed and
    /// drained.
    pub async fn take(&self) -> Option<Vec<Frame>> {
        loop {
            {
                let mut q = self.inner.lock().unwrap();
                if !q.frames.is_empty() {
                    return Some(q.frames.drain(..).map(|(f, _)| f).collect());
                }
                if q.closed {
                    return None;
                }
            }
            self.notify.notified().await;
        }
    }

    pub fn close(&self) {
        self.inner.lock().unwrap().closed = true;
        self.notify.notify_one();
    }

    pub fn dropped(&self) -> u32 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameType;

    fn f(b: u8) -> Frame {
        Frame::new(FrameType::State, vec![b])
    }

    #[tokio::test]
    async fn drops_oldest_push_first() {
        let q = OutQueue::new(3);
        q.push_droppable(f(1));
        q.push(f(2));
        q.push_droppable(f(3));
        q.push_droppable(f(4));
        q.push(f(5));
        assert_eq!(q.dropped(), 2);
        let got: Vec<u8> = q.take().await.unwrap().iter().map(|f| f.payload[0]).collect();
        assert_eq!(got, vec![2, 4, 5]);
    }

    #[tokio::test]
    async fn replies_are_never_dropped() {
        let q = OutQueue::new(1);
        q.push(f(1));
        q.push(f(2));
        q.push_droppable(f(3));
        assert_eq!(q.dropped(), 1);
        assert_eq!(q.take().await.unwrap().len(), 2);
        q.close();
        assert!(q.take().await.is_none());
    }
}
