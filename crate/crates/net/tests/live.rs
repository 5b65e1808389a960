use futures_util::{SinkExt, StreamExt};
use textmerge::{Diff, Doc};
use textmerge_net::{run_script, serve, Client, ClientError, Mode, ReplicaError, ScriptConfig, WireMsg};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

#[tokio::test]
async fn push_and_pull_agree_on_a_few_schedules() {
    for seed in 0..5 {
        let cfg = ScriptConfig {
            seed,
            ..ScriptConfig::default()
        };
        let push = run_script(&cfg, Mode::Push).await.unwrap();
        let pull = run_script(&cfg, Mode::Pull).await.unwrap();
        assert!(push.quiesced() && pull.quiesced(), "seed {seed}");
        assert_eq!(push.server_doc, pull.server_doc, "seed {seed}");
    }
}

#[tokio::test]
async fn pull_round_trip() {
    let server = serve("127.0.0.1:0", Doc::from("abc"), Mode::Pull).await.unwrap();
    let mut a = Client::connect(&server.url(), "a", Mode::Pull).await.unwrap();
    let mut b = Client::connect(&server.url(), "b", Mode::Pull).await.unwrap();
    assert_eq!(a.doc().to_string(), "abc");
    a.edit(Diff::insert(3, "d")).unwrap();
    b.edit(Diff::delete(0, 1)).unwrap();
    a.put().await.unwrap();
    server.wait_processed(a.sent() + b.sent()).await;
    b.put().await.unwrap();
    b.get().await.unwrap();
    a.get().await.unwrap();
    assert_eq!(a.doc().to_string(), "bcd");
    assert_eq!(b.doc().to_string(), "bcd");
    assert_eq!(server.snapshot().await.unwrap().doc.to_string(), "bcd");
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn duplicate_join_is_rejected() {
    let server = serve("127.0.0.1:0", Doc::default(), Mode::Push).await.unwrap();
    let _a = Client::connect(&server.url(), "a", Mode::Push).await.unwrap();
    match Client::connect(&server.url(), "a", Mode::Push).await {
        Err(ClientError::Protocol(ReplicaError::Server(msg))) => assert!(msg.contains("already joined")),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second join accepted"),
    }
}

async fn raw_exchange(url: &str, frames: &[&str]) -> Vec<WireMsg> {
    let (mut ws, _) = connect_async(url).await.unwrap();
    for f in frames {
        ws.send(Message::text(*f)).await.unwrap();
    }
    let mut got = vec![];
    while let Some(Ok(m)) = ws.next().await {
        match m {
            Message::Text(t) => got.push(WireMsg::decode(t.as_str()).unwrap()),
            Message::Close(_) => break,
            _ => {}
        }
    }
    got
}

#[tokio::test]
async fn bad_frames_get_an_error_and_a_close() {
    let server = serve("127.0.0.1:0", Doc::from("ab"), Mode::Pull).await.unwrap();
    let url = server.url();

    let got = raw_exchange(&url, &["{nonsense"]).await;
    assert!(matches!(got.as_slice(), [WireMsg::Err { .. }]));

    let got = raw_exchange(&url, &[r#"{"t":"get"}"#]).await;
    assert!(matches!(got.as_slice(), [WireMsg::Err { msg }] if msg.contains("join")));

    let got = raw_exchange(
        &url,
        &[
            r#"{"t":"join","client":"z"}"#,
            r#"{"t":"put","diffs":[{"op":"d","pos":1,"len":5}],"seen":0}"#,
        ],
    )
    .await;
    assert!(matches!(got.as_slice(), [WireMsg::Doc { .. }, WireMsg::Err { .. }]));

    // The leave is processed asynchronously after the close frame goes out.
    let mut snap = server.snapshot().await.unwrap();
    for _ in 0..10_000 {
        if snap.serials.is_empty() {
            break;
        }
        tokio::task::yield_now().await;
        snap = server.snapshot().await.unwrap();
    }
    assert_eq!(snap.doc.to_string(), "ab");
    assert!(snap.serials.is_empty());
    assert_eq!(snap.processed, 4);
}
