//! Listeners for the TCP and WebSocket transports. Both carry the same
//! frames; over WebSocket every binary message holds exactly one frame.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinSet;
use tokio_tungstenite::tungstenite::Message;

use crate::conn::{Connection, Shared};
use crate::frame::{Frame, FrameDecoder, FrameError, Reason};
use crate::queue::OutQueue;

const INBOUND_DEPTH: usize = 64;

pub struct Server {
    shared: Arc<Shared>,
    tcp: TcpListener,
    ws: TcpListener,
}

impl Server {
    /// Binds both listeners; a taken port is an error.
    pub async fn bind(shared: Shared) -> io::Result<Self> {
        let tcp = TcpListener::bind(shared.config.tcp_addr).await.map_err(|e| annotate(e, "tcp", shared.config.tcp_addr))?;
        let ws = TcpListener::bind(shared.config.ws_addr).await.map_err(|e| annotate(e, "websocket", shared.config.ws_addr))?;
        Ok(Self { shared: Arc::new(shared), tcp, ws })
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp.local_addr().expect("bound")
    }

    pub fn ws_addr(&self) -> SocketAddr {
        self.ws.local_addr().expect("bound")
    }

    pub fn shared(&self) -> Arc<Shared> {
        Arc::clone(&self.shared)
    }

    /// Serves until `shutdown` resolves, then closes every connection and
    /// waits for open sessions to be finalized.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) {
        let (stop_tx, stop_rx) = watch::channel(false);
        let mut conns = JoinSet::new();
        log::info!("listening on tcp {} and websocket {}", self.tcp_addr(), self.ws_addr());
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                r = self.tcp.accept() => match r {
                    Ok((stream, peer)) => {
                        log::debug!("tcp connection from {peer}");
                        let _ = stream.set_nodelay(true);
                        conns.spawn(serve_tcp(stream, Arc::clone(&self.shared), stop_rx.clone()));
                    }
                    Err(e) => log::warn!("tcp accept: {e}"),
                },
                r = self.ws.accept() => match r {
                    Ok((stream, peer)) => {
                        log::debug!("websocket connection from {peer}");
                        let _ = stream.set_nodelay(true);
                        conns.spawn(serve_ws(stream, Arc::clone(&self.shared), stop_rx.clone()));
                    }
                    Err(e) => log::warn!("websocket accept: {e}"),
                },
                Some(_) = conns.join_next(), if !conns.is_empty() => {}
            }
        }
        let _ = stop_tx.send(true);
        while conns.join_next().await.is_some() {}
        log::info!("server stopped");
    }
}

fn annotate(e: io::Error, what: &str, addr: SocketAddr) -> io::Error {
    io::Error::new(e.kind(), format!("cannot bind {what} listener on {addr}: {e}"))
}

fn framing_error(e: &FrameError) -> Frame {
    Frame::error(Reason::TooLarge, &e.to_string())
}

async fn serve_tcp(stream: TcpStream, shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    let (mut rd, mut wr) = stream.into_split();
    let out = Arc::new(OutQueue::new(shared.config.queue_capacity));
    let (tx, rx) = mpsc::channel(INBOUND_DEPTH);
    let conn = tokio::spawn(Connection::new(shared, Arc::clone(&out)).run(rx));
    let writer_out = Arc::clone(&out);
    let writer = tokio::spawn(async move {
        let mut buf = Vec::new();
        while let Some(frames) = writer_out.take().await {
            buf.clear();
            for f in &frames {
                f.encode_into(&mut buf);
            }
            if wr.write_all(&buf).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });
    let mut dec = FrameDecoder::new();
    let mut chunk = vec![0u8; 64 * 1024];
    'read: loop {
        let n = tokio::select! {
            r = rd.read(&mut chunk) => match r {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            },
            _ = stop.changed() => break,
        };
        dec.extend(&chunk[..n]);
        loop {
            match dec.next_frame() {
                Ok(Some(f)) => {
                    if tx.send(f).await.is_err() {
                        break 'read;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    out.push(framing_error(&e));
                    break 'read;
                }
            }
        }
    }
    drop(tx);
    let _ = conn.await;
    let _ = writer.await;
}

async fn serve_ws(stream: TcpStream, shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("websocket handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let out = Arc::new(OutQueue::new(shared.config.queue_capacity));
    let (tx, rx) = mpsc::channel(INBOUND_DEPTH);
    let conn = tokio::spawn(Connection::new(shared, Arc::clone(&out)).run(rx));
    let writer_out = Arc::clone(&out);
    let writer = tokio::spawn(async move {
        while let Some(frames) = writer_out.take().await {
            for f in frames {
                if sink.feed(Message::binary(f.encode())).await.is_err() {
                    return;
                }
            }
            if sink.flush().await.is_err() {
                return;
            }
        }
        let _ = sink.close().await;
    });
    loop {
        let msg = tokio::select! {
            m = source.next() => match m {
                Some(Ok(m)) => m,
                _ => break,
            },
            _ = stop.changed() => break,
        };
        let bytes = match msg {
            Message::Binary(b) => b,
            Message::Close(_) => break,
            Message::Text(_) => {
                out.push(Frame::error(Reason::BadPayload, "frames travel in binary messages"));
                continue;
            }
            _ => continue,
        };
        match Frame::decode(&bytes) {
            Ok(Some((f, used))) if used == bytes.len() => {
                if tx.send(f).await.is_err() {
                    break;
                }
            }
            Ok(_) => out.push(Frame::error(Reason::BadPayload, "message must hold exactly one frame")),
            Err(e) => {
                out.push(framing_error(&e));
                break;
            }
        }
    }
    drop(tx);
    let _ = conn.await;
    let _ = writer.await;
}
