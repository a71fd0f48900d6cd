mod common;

use std::time::{Duration, Instant};

use common::*;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use socialsense::server::PromptList;
use socialsense::store::load_annotations;
use socialsense_core::gateway::{
    ClockState, PromptEvent, PromptKind, Response, NEGATIVE_FOLLOW_UP_FIELDS, POSITIVE_FOLLOW_UP_FIELDS,
};
use socialsense_core::HOUR_MS;

async fn control(c: &Client, s: &TestServer, body: Value) -> ClockState {
    let r = c.post(s.api("/api/replay/control")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK, "{body}");
    r.json().await.unwrap()
}

async fn prompts(c: &Client, s: &TestServer) -> PromptList {
    c.get(s.api("/api/prompts")).send().await.unwrap().json().await.unwrap()
}

async fn post(c: &Client, url: String, body: Value) -> (StatusCode, Value) {
    let r = c.post(url).json(&body).send().await.unwrap();
    (r.status(), r.json().await.unwrap())
}

fn detected(list: &PromptList) -> Vec<&PromptEvent> {
    list.prompts.iter().map(|v| &v.prompt).filter(|p| p.kind == PromptKind::DetectedInteraction).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn scripted_responder_round_trip() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    assert_eq!(s.run.segments.len(), 3, "fixture plants three interactions");
    control(&c, &s, json!({"command": "play"})).await;
    s.tick(3 * HOUR_MS);
    let list = prompts(&c, &s).await;
    let det = detected(&list);
    assert_eq!(det.len(), 3);

    let positive = json!({"people_count": 2, "mode": "in-person", "rating": 4});
    let unsure = json!({"people_count": "?", "mode": "hybrid", "rating": "?"});
    let negative = json!({"reason": "no-interaction", "device_speech": true, "nearby_speech": false});
    let answers = [("yes", positive), ("no", negative), ("maybe", unsure)];
    let mut key_counts = Vec::new();
    for (p, (answer, fu)) in det.iter().zip(&answers) {
        let (st, body) =
            post(&c, s.api(&format!("/api/prompts/{}/response", p.id)), json!({"answer": answer, "follow_ups": fu})).await;
        assert_eq!(st, StatusCode::CREATED, "{body}");
        assert_eq!(body["prompt_id"], p.id);
        key_counts.push(body["follow_ups"].as_object().unwrap().len());
    }
    assert_eq!(key_counts, [3, 3, 3]);
    assert_eq!(POSITIVE_FOLLOW_UP_FIELDS.len(), NEGATIVE_FOLLOW_UP_FIELDS.len());
    // stored "?" stays "?"
    let back = prompts(&c, &s).await;
    let maybe = back.prompts.iter().find(|v| v.prompt.id == det[2].id).unwrap();
    let stored = serde_json::to_value(maybe.response.as_ref().unwrap()).unwrap();
    assert_eq!(stored["follow_ups"]["people_count"], "?");

    // one edit, one add, one zero-delta edit
    let seg1 = s.run.segments[&1];
    let (st, edited) = post(&c, s.api("/api/interactions"), json!({"start_ms": hm(14, 0), "end_ms": hm(14, 10)})).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(edited["provenance"], "added");
    assert!(edited["id"].as_u64().unwrap() > 3, "added ids never collide with detected ones");
    let r = c
        .patch(s.api("/api/interactions/1"))
        .json(&json!({"start_ms": seg1.start_ms - 120_000, "end_ms": seg1.end_ms + 180_000}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let e: Value = r.json().await.unwrap();
    assert_eq!((e["provenance"].as_str(), e["zero_delta"].as_bool()), (Some("edited"), Some(false)));
    let seg2 = s.run.segments[&2];
    let z: Value = c
        .patch(s.api("/api/interactions/2"))
        .json(&json!({"start_ms": seg2.start_ms, "end_ms": seg2.end_ms}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(z["zero_delta"], true);

    // every response reads back through GET /api/prompts
    let back = prompts(&c, &s).await;
    for (p, (answer, _)) in det.iter().zip(&answers) {
        let v = back.prompts.iter().find(|v| v.prompt.id == p.id).unwrap();
        assert_eq!(serde_json::to_value(v.response.as_ref().unwrap().answer).unwrap(), *answer);
    }
    let segs: Vec<Value> = c.get(s.api("/api/segments")).send().await.unwrap().json().await.unwrap();
    assert_eq!(segs.len(), 4);
    let window: Vec<Value> = c
        .get(s.api(&format!("/api/segments?from={}&to={}", hm(13, 0), hm(15, 0))))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(window.len(), 1);

    // the store on disk agrees
    let state = load_annotations(&s.dir.path().join("annotations")).unwrap();
    assert_eq!(state.responses.values().map(Vec::len).sum::<usize>(), 3);
    assert_eq!(state.mutations.len(), 3);
    assert_eq!(state.latest_response(det[1].id).unwrap().answer, Response::No);
    assert!(!s.dir.path().join("annotations").starts_with(s.dir.path().join("features")));
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_name_the_problem() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    control(&c, &s, json!({"command": "play"})).await;
    s.tick(3 * HOUR_MS);
    let list = prompts(&c, &s).await;
    let det = detected(&list)[0].id;
    let missed = list.prompts.iter().find(|v| v.prompt.kind == PromptKind::MissedInteractionQuery).unwrap().prompt.id;

    let (st, body) = post(&c, s.api("/api/prompts/999/response"), json!({"answer": "yes"})).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("999"));

    let bad_rating = json!({"answer": "yes", "follow_ups": {"people_count": 1, "mode": "virtual", "rating": 0}});
    let (st, body) = post(&c, s.api(&format!("/api/prompts/{det}/response")), bad_rating).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("rating")));

    let (st, body) = post(&c, s.api(&format!("/api/prompts/{det}/response")), json!({"answer": "yes"})).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("follow_ups")));

    let (st, body) = post(&c, s.api(&format!("/api/prompts/{missed}/response")), json!({"answer": "maybe"})).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("answer")));
    let (st, _) = post(&c, s.api(&format!("/api/prompts/{missed}/response")), json!({"answer": "no"})).await;
    assert_eq!(st, StatusCode::CREATED);

    let (st, body) = post(&c, s.api("/api/interactions"), json!({"start_ms": 10, "end_ms": 10})).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("end_ms")));
    let r = c.patch(s.api("/api/interactions/77")).json(&json!({"start_ms": 1, "end_ms": 2})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let (st, _) = post(&c, s.api("/api/interactions"), json!({"start_ms": "soon"})).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let (st, body) = post(&c, s.api("/api/replay/control"), json!({"command": "seek", "to_ms": NINE - 1})).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("to_ms")));
    let (st, body) = post(&c, s.api("/api/replay/control"), json!({"command": "set-speed", "speed": 0.0})).await;
    assert_eq!((st, body["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("speed")));

    // duplicate answers: last one wins, both kept
    for a in ["no", "yes"] {
        let (st, _) = post(&c, s.api(&format!("/api/prompts/{missed}/response")), json!({"answer": a})).await;
        assert_eq!(st, StatusCode::CREATED);
    }
    let list = prompts(&c, &s).await;
    let v = list.prompts.iter().find(|v| v.prompt.id == missed).unwrap();
    assert_eq!(v.response.as_ref().unwrap().answer, Response::Yes);
    let state = load_annotations(&s.dir.path().join("annotations")).unwrap();
    assert_eq!(state.responses[&missed].len(), 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn clock_pause_speed_and_recording_indicator() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    let st: ClockState = c.get(s.api("/api/replay/clock")).send().await.unwrap().json().await.unwrap();
    assert_eq!((st.now_ms, st.playing, st.recording), (NINE, false, true));

    // paused: wall time passes, nothing happens
    s.tick(3 * HOUR_MS);
    let list = prompts(&c, &s).await;
    assert_eq!((list.now_ms, list.prompts.len()), (NINE, 0));

    control(&c, &s, json!({"command": "set-speed", "speed": 10.0})).await;
    control(&c, &s, json!({"command": "play"})).await;
    s.tick(1_000);
    let st: ClockState = c.get(s.api("/api/replay/clock")).send().await.unwrap().json().await.unwrap();
    assert_eq!(st.now_ms, NINE + 10_000);
    assert!(st.recording, "09:00:10 is inside the first probe");
    s.tick(600);
    let st: ClockState = c.get(s.api("/api/replay/clock")).send().await.unwrap().json().await.unwrap();
    assert_eq!(st.now_ms, NINE + 16_000);
    assert!(!st.recording);

    // probe schedule for the indicator
    let probes: Vec<Value> = c
        .get(s.api(&format!("/api/replay/probes?from={NINE}&to={}", NINE + 600_000)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let starts: Vec<u64> = probes.iter().map(|p| p["start"].as_u64().unwrap()).collect();
    assert_eq!(starts, (0..7).map(|i| NINE + i * 90_000).collect::<Vec<_>>());
    assert!(probes.iter().all(|p| p["end"].as_u64().unwrap() - p["start"].as_u64().unwrap() == 15_000));

    control(&c, &s, json!({"command": "pause"})).await;
    s.tick(HOUR_MS);
    assert_eq!(prompts(&c, &s).await.now_ms, NINE + 16_000);
}

#[tokio::test(flavor = "multi_thread")]
async fn seek_past_missed_query_fires_at_next_probe_start() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    // the first missed query falls due between 10:20 and 10:25
    let target = hm(11, 0) + 10_000;
    let st = control(&c, &s, json!({"command": "seek", "to_ms": target})).await;
    assert_eq!(st.now_ms, target);
    assert!(prompts(&c, &s).await.prompts.is_empty(), "jumped-over segments are not prompted");
    let state = load_annotations(&s.dir.path().join("annotations")).unwrap();
    assert_eq!(state.suppressed.len(), 3);
    assert!(state.suppressed.iter().all(|x| serde_json::to_value(x.reason).unwrap() == "skipped"));

    control(&c, &s, json!({"command": "play"})).await;
    s.tick(120_000);
    let list = prompts(&c, &s).await;
    assert_eq!(list.prompts.len(), 1);
    let q = &list.prompts[0].prompt;
    assert_eq!(q.kind, PromptKind::MissedInteractionQuery);
    assert_eq!(q.issued_at, hm(11, 1) + 30_000, "first probe start after the target");
    assert_eq!(q.interval.start_ms, NINE);
    assert_eq!(q.interval.end_ms, q.issued_at);

    // a backward seek moves the clock only
    control(&c, &s, json!({"command": "seek", "to_ms": NINE})).await;
    s.tick(3 * 60_000);
    assert_eq!(prompts(&c, &s).await.prompts.len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn long_poll_wakes_on_new_prompt() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    control(&c, &s, json!({"command": "play"})).await;
    let url = s.api(&format!("/api/prompts?since={NINE}&wait_ms=10000"));
    let t0 = Instant::now();
    let poll = tokio::spawn({
        let c = c.clone();
        async move { c.get(url).send().await.unwrap().json::<PromptList>().await.unwrap() }
    });
    tokio::time::sleep(Duration::from_millis(300)).await;
    assert!(!poll.is_finished(), "nothing to report yet");
    s.tick(HOUR_MS);
    let list = poll.await.unwrap();
    assert!(t0.elapsed() < Duration::from_secs(5));
    assert_eq!(list.prompts[0].prompt.interaction_id, Some(1));

    // an empty wait returns when the budget runs out
    let t0 = Instant::now();
    let r: PromptList = c
        .get(s.api(&format!("/api/prompts?since={}&wait_ms=200", 10 * HOUR_MS)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(r.prompts.is_empty());
    assert!(t0.elapsed() >= Duration::from_millis(200));
}

#[tokio::test(flavor = "multi_thread")]
async fn sse_stream_pushes_prompts() {
    let s = TestServer::start(morning()).await;
    let c = Client::new();
    let mut resp = c.get(s.api("/api/prompts/stream")).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    control(&c, &s, json!({"command": "play"})).await;
    s.tick(40 * 60_000);

    let mut buf = String::new();
    let got = tokio::time::timeout(Duration::from_secs(10), async {
        loop {
            let chunk = resp.chunk().await.unwrap().expect("stream open");
            buf.push_str(std::str::from_utf8(&chunk).unwrap());
            if let Some(i) = buf.find("event: prompt\ndata: ") {
                let rest = &buf[i + "event: prompt\ndata: ".len()..];
                if let Some(j) = rest.find('\n') {
                    return serde_json::from_str::<PromptEvent>(&rest[..j]).unwrap();
                }
            }
        }
    })
    .await
    .expect("prompt event within 10 s");
    assert_eq!(got.interaction_id, Some(1));
    assert_eq!(got.interval.start_ms, s.run.segments[&1].start_ms);
}
