mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use base64::Engine;
use nbv_core::env::EnvConfig;
use nbv_core::protocol::{codes, serve_stream, Client, Reply, Session};
use nbv_core::Execution;
use proptest::prelude::*;
use serde_json::json;

fn error_code(r: &Reply) -> &str {
    match r {
        Reply::Error { code, .. } => code,
        other => panic!("expected an error, got {other:?}"),
    }
}

#[test]
fn session_over_tcp() {
    let config = common::config();
    let scene = common::cube_scene(&config);
    let (addr, stop, handle) = common::spawn_server(config.clone(), vec![scene.clone()]);
    let mut c = Client::connect(addr).unwrap();

    let Reply::Hello { version, grid_dims, action_box } = c.hello(false).unwrap() else { panic!() };
    assert_eq!(version, "1");
    assert_eq!(grid_dims, [20, 20, 10]);
    assert_eq!(action_box, [[-10.0, -10.0, 0.0], [10.0, 10.0, 10.0]]);

    assert_eq!(error_code(&c.step([5.0, 5.0, 5.0, 0.0, 0.0]).unwrap()), codes::NO_EPISODE);
    assert_eq!(error_code(&c.send_raw(b"{\"type\":").unwrap()), codes::BAD_JSON);
    assert_eq!(error_code(&c.request(&json!({"type": "jump"})).unwrap()), codes::UNKNOWN_TYPE);
    assert_eq!(error_code(&c.reset(Some("nope"), None).unwrap()), codes::UNKNOWN_SCENE);

    let Reply::ResetOk { obs: first } = c.reset(Some("cube"), None).unwrap() else { panic!() };
    assert_eq!(first.step, 0);
    assert_eq!(first.grid_logodds.len(), 20 * 20 * 10);
    assert_eq!(first.grid_states.len(), 20 * 20 * 10);
    assert!(first.frames.is_none());
    assert!(first.coverage > 0.0 && first.coverage <= 100.0);

    assert_eq!(error_code(&c.step_raw_arity()), codes::BAD_ACTION);
    let Reply::StepResult { obs, reward, terminated, reason, info } =
        c.step([8.0, -7.0, 6.0, -0.3, 2.4]).unwrap()
    else {
        panic!()
    };
    assert_eq!(reward, (obs.coverage - first.coverage) / 100.0);
    assert_eq!(info.cr, obs.coverage);
    assert!(!terminated && reason.is_none() && !info.collision);
    assert_eq!(obs.pose_history.len(), 2);

    // Collision ends the episode; further steps are refused until reset.
    let Reply::StepResult { reward, terminated, reason, .. } = c.step([0.0, 0.0, 2.0, 0.0, 0.0]).unwrap() else {
        panic!()
    };
    assert_eq!((reward, terminated, reason.as_deref()), (-10.0, true, Some("collision")));
    assert_eq!(error_code(&c.step([8.0, -7.0, 6.0, 0.0, 0.0]).unwrap()), codes::EPISODE_DONE);

    assert_eq!(c.close().unwrap(), Reply::Close);
    stop.store(true, Ordering::Relaxed);
    handle.join().unwrap().unwrap();
}

trait RawArity {
    fn step_raw_arity(&mut self) -> Reply;
}

impl<R: BufRead, W: Write> RawArity for Client<R, W> {
    fn step_raw_arity(&mut self) -> Reply {
        self.request(&json!({"type": "step", "action": [1.0, 2.0, 3.0]})).unwrap()
    }
}

#[test]
fn frames_and_pooling_on_request() {
    let config = common::config();
    let scene = common::cube_scene(&config);
    let mut s = Session::new(config.clone(), vec![scene].into(), Execution::Parallel);
    let (hello, _) = s.handle(br#"{"type":"hello","want_frames":true,"pool_dims":[10,10,5],"extra":1}"#);
    assert!(matches!(hello, Reply::Hello { grid_dims: [10, 10, 5], .. }));
    let (r, _) = s.handle(br#"{"type":"hello","pool_dims":[3,3,3]}"#);
    assert_eq!(error_code(&r), codes::BAD_REQUEST);
    let (Reply::ResetOk { obs }, _) = s.handle(br#"{"type":"reset"}"#) else { panic!() };
    assert_eq!(obs.grid_dims, [10, 10, 5]);
    assert_eq!(obs.grid_states.len(), 500);
    assert_eq!(obs.frame_size, Some([400, 400]));
    let frames = obs.frames.unwrap();
    assert_eq!(frames.len(), 1);
    let raw = base64::engine::general_purpose::STANDARD.decode(&frames[0]).unwrap();
    assert_eq!(raw.len(), 400 * 400);
    assert!(raw.iter().any(|&b| b > 0));
    for _ in 0..6 {
        let (r, _) = s.handle(br#"{"type":"step","action":[8,-7,6,-0.3,2.4]}"#);
        assert!(matches!(r, Reply::StepResult { .. }));
    }
    let (Reply::StepResult { obs, .. }, _) = s.handle(br#"{"type":"step","action":[8,7,6,-0.3,-2.4]}"#) else {
        panic!()
    };
    // K previous frames plus the current one.
    assert_eq!(obs.frames.unwrap().len(), config.frame_stack_k + 1);
}

#[test]
fn concurrent_connections_are_independent() {
    let config = common::config();
    let scenes = common::house_scenes(2, &config);
    let (addr, stop, handle) = common::spawn_server(config.clone(), scenes.clone());
    let a0 = common::scripted_actions(&config, &scenes[0], 5, 1);
    let a1 = common::scripted_actions(&config, &scenes[1], 5, 2);
    let mut c0 = Client::connect(addr).unwrap();
    let mut c1 = Client::connect(addr).unwrap();
    let cov = |r: Reply| match r {
        Reply::ResetOk { obs } | Reply::StepResult { obs, .. } => obs.coverage,
        other => panic!("{other:?}"),
    };
    let mut w0 = vec![cov(c0.reset(Some("house_000"), None).unwrap())];
    let mut w1 = vec![cov(c1.reset(Some("house_001"), None).unwrap())];
    // Interleave the two episodes step by step.
    for (x, y) in a0.iter().zip(&a1) {
        w0.push(cov(c0.step(*x).unwrap()));
        w1.push(cov(c1.step(*y).unwrap()));
    }
    let (l0, _) = common::in_process_session(&config, &scenes[0], &a0);
    let (l1, _) = common::in_process_session(&config, &scenes[1], &a1);
    assert_eq!(common::bits(&w0), common::bits(&l0));
    assert_eq!(common::bits(&w1), common::bits(&l1));
    drop((c0, c1));
    stop.store(true, Ordering::Relaxed);
    handle.join().unwrap().unwrap();
}

#[test]
fn scripted_session_matches_in_process_run() {
    let config = common::config();
    let scenes = common::house_scenes(1, &config);
    let actions = common::scripted_actions(&config, &scenes[0], 10, 9);
    let (addr, stop, handle) = common::spawn_server(config.clone(), scenes.clone());
    let (wire_cov, wire_rew) = common::wire_session(addr, "house_000", &actions);
    let (cov, rew) = common::in_process_session(&config, &scenes[0], &actions);
    assert_eq!(common::bits(&wire_cov), common::bits(&cov));
    assert_eq!(common::bits(&wire_rew), common::bits(&rew));
    stop.store(true, Ordering::Relaxed);
    handle.join().unwrap().unwrap();
}

#[test]
fn raw_socket_lines_and_disconnect() {
    let config = common::config();
    let scene = common::cube_scene(&config);
    let (addr, stop, handle) = common::spawn_server(config, vec![scene]);
    let mut stream = TcpStream::connect(addr).unwrap();
    // Two requests in one write, the second split across writes.
    stream.write_all(b"{\"type\":\"hello\"}\r\n{\"type\":").unwrap();
    stream.flush().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(120));
    stream.write_all(b"\"reset\",\"seed\":3}\n").unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.starts_with("{\"type\":\"hello\""), "{line}");
    line.clear();
    reader.read_line(&mut line).unwrap();
    assert!(line.starts_with("{\"type\":\"reset_ok\""));
    // Dropping the connection mid-episode must not disturb the server.
    drop((reader, stream));
    let mut c = Client::connect(addr).unwrap();
    assert!(matches!(c.hello(false).unwrap(), Reply::Hello { .. }));
    stop.store(true, Ordering::Relaxed);
    handle.join().unwrap().unwrap();
}

#[test]
fn server_needs_a_scene() {
    let config = Arc::new(EnvConfig::default());
    assert!(nbv_core::protocol::Server::bind("127.0.0.1:0", config, Vec::new().into(), Execution::Sequential).is_err());
}

fn fuzz_session() -> Session {
    let config = Arc::new(EnvConfig {
        gt_samples: 500,
        intrinsics: nbv_core::geometry::CameraIntrinsics::new(8, 8, std::f64::consts::FRAC_PI_2, 40.0).unwrap(),
        ..EnvConfig::default()
    });
    let scene = common::cube_scene(&config);
    Session::new(config, vec![scene].into(), Execution::Sequential)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_bytes_get_one_reply_per_line(
        lines in prop::collection::vec(
            prop_oneof![
                prop::collection::vec(any::<u8>().prop_filter("no newline", |b| *b != b'\n'), 0..40),
                Just(br#"{"type":"reset"}"#.to_vec()),
                Just(br#"{"type":"step","action":[1,2,3,0.1,0.2]}"#.to_vec()),
                Just(br#"{"type":"step","action":[1e308,-1e308,"x",null,0]}"#.to_vec()),
                Just(br#"{"type":"hello","pool_dims":[0,1,2]}"#.to_vec()),
            ],
            0..12,
        )
    ) {
        let mut input = Vec::new();
        for l in &lines {
            input.extend_from_slice(l);
            input.push(b'\n');
        }
        let mut out = Vec::new();
        serve_stream(&mut fuzz_session(), &input[..], &mut out, &AtomicBool::new(false)).unwrap();
        let replies: Vec<Reply> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let served = lines
            .iter()
            .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
            .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
            .count();
        prop_assert_eq!(replies.len(), served);
    }
}
