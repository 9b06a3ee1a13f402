mod common;

use std::time::{Duration, Instant};

use common::*;
use roblab_core::booking::BookingStore;
use roblab_server::layout::StateFrame;
use roblab_server::{Frame, FrameType};
use serde_json::json;
use tokio_tungstenite::tungstenite::{connect, Message};

type Ws = tokio_tungstenite::tungstenite::WebSocket<tokio_tungstenite::tungstenite::stream::MaybeTlsStream<std::net::TcpStream>>;

fn send(ws: &mut Ws, f: &Frame) {
    ws.send(Message::binary(f.encode())).unwrap();
}

fn next(ws: &mut Ws) -> Frame {
    loop {
        if let Message::Binary(b) = ws.read().unwrap() {
            let (f, used) = Frame::decode(&b).unwrap().unwrap();
            assert_eq!(used, b.len(), "one frame per message");
            return f;
        }
    }
}

fn next_of(ws: &mut Ws, kind: FrameType) -> Frame {
    let deadline = Instant::now() + Duration::from_secs(5);
    while Instant::now() < deadline {
        let f = next(ws);
        if f.frame_type() == Some(kind) {
            return f;
        }
    }
    panic!("no {kind:?} frame");
}

#[test]
fn browser_transport_carries_the_same_frames() {
    let lab = Lab::start(&BookingStore::new());
    let (mut ws, _) = connect(format!("ws://{}", lab.ws)).unwrap();

    send(&mut ws, &Frame::json(FrameType::Lifecycle, &json!({ "op": "open" })));
    let f = next(&mut ws);
    assert_eq!(f.payload_json().unwrap()["reason"], "unauthenticated");

    send(&mut ws, &Frame::json(FrameType::Auth, &json!({ "user": "example", "password": "" })));
    assert_eq!(next(&mut ws).frame_type(), Some(FrameType::AuthOk));

    send(&mut ws, &Frame::json(FrameType::Lifecycle, &json!({ "op": "open", "seq": 9 })));
    let ack = next_of(&mut ws, FrameType::Ack).payload_json().unwrap();
    assert_eq!((ack["state"].as_str(), ack["seq"].as_u64()), (Some("open"), Some(9)));

    let state = StateFrame::decode(&next_of(&mut ws, FrameType::State).payload).unwrap();
    assert_eq!(state.mode, 0);
    assert_eq!(next_of(&mut ws, FrameType::Map).payload.len() > 16, true);

    ws.send(Message::text("hello")).unwrap();
    let err = next_of(&mut ws, FrameType::Error).payload_json().unwrap();
    assert_eq!(err["reason"], "bad-payload");
    ws.close(None).unwrap();
}

#[test]
fn default_ports_are_7420_and_7421() {
    let c = roblab_server::ServerConfig::default();
    assert_eq!((c.tcp_addr.port(), c.ws_addr.port()), (7420, 7421));
}
