use roblab_core::world::CompressedWorld;
use roblab_server::layout::{StateFrame, STATE_LEN};
use roblab_server::{Frame, MapFrame};
use serde_json::Value;

fn fixture(name: &str) -> Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

#[test]
fn state_vector() {
    let v = fixture("state.json");
    let f = &v["fields"];
    let n = |k: &str| f[k].as_f64().unwrap();
    let u = |k: &str| f[k].as_u64().unwrap();
    let s = StateFrame {
        t_us: u("t_us"),
        tick: u("tick") as u32,
        x: n("x"),
        y: n("y"),
        th: n("th"),
        vx: n("vx"),
        vy: n("vy"),
        w: n("w"),
        d: u("d") as u8,
        battery_mv: n("battery_mv"),
        mode: u("mode") as u8,
        flags: u("flags") as u8,
        overruns: u("overruns") as u32,
        dropped: u("dropped") as u32,
        u1: n("u1"),
        u2: n("u2"),
    };
    let bytes = unhex(v["hex"].as_str().unwrap());
    assert_eq!(bytes.len(), STATE_LEN);
    assert_eq!(s.encode(), bytes);
    assert_eq!(StateFrame::decode(&bytes), Some(s));
    assert_eq!(StateFrame::decode(&bytes[..STATE_LEN - 1]), None);
}

#[test]
fn map_vectors() {
    let v = fixture("map.json");
    for key in ["small", "varint"] {
        let m = &v[key];
        let runs: Vec<u32> = m["runs"].as_array().unwrap().iter().map(|r| r.as_u64().unwrap() as u32).collect();
        let world = CompressedWorld {
            rows: m["rows"].as_u64().unwrap() as u16,
            cols: m["cols"].as_u64().unwrap() as u16,
            threshold: m["threshold_byte"].as_u64().unwrap() as f64 / 255.0,
            runs,
        };
        let frame = MapFrame { t_us: m["t_us"].as_u64().unwrap(), revision: m["revision"].as_u64().unwrap(), world };
        let bytes = unhex(m["hex"].as_str().unwrap());
        assert_eq!(frame.encode(), bytes, "{key}");
        let back = MapFrame::decode(&bytes).unwrap();
        assert_eq!((back.t_us, back.revision, &back.world.runs), (frame.t_us, frame.revision, &frame.world.runs));
    }
    let small = MapFrame::decode(&unhex(v["small"]["hex"].as_str().unwrap())).unwrap().world.decompress().unwrap();
    let rows: Vec<String> =
        (0..3).map(|r| (0..4).map(|c| if small.get(r, c) { '#' } else { '.' }).collect()).collect();
    assert_eq!(rows, ["....", ".##.", "####"]);
}

#[test]
fn frame_vectors() {
    for f in fixture("frames.json").as_array().unwrap() {
        let frame = Frame { kind: f["kind"].as_u64().unwrap() as u8, payload: unhex(f["payload_hex"].as_str().unwrap()) };
        let bytes = unhex(f["hex"].as_str().unwrap());
        assert_eq!(frame.encode(), bytes);
        assert_eq!(Frame::decode(&bytes).unwrap(), Some((frame, bytes.len())));
    }
}
