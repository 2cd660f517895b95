use reliefchain_client::{Client, ClientError};
use reliefchain_core::api::{CorpusRequest, ErrorKind, RunRequest};
use reliefchain_core::forensics::Verdict;
use reliefchain_core::run_dir::ANCHORS;
use reliefchain_core::Hash32;

const MINIMAL: &str = include_str!("../../../scenarios/minimal.json");

async fn client() -> Client {
    let addr = reliefchain_service::spawn(([127, 0, 0, 1], 0).into()).await.unwrap();
    Client::new(format!("http://{addr}/"))
}

#[tokio::test(flavor = "multi_thread")]
async fn endpoints_round_trip() {
    let c = client().await;
    assert_eq!(c.health().await.unwrap().status, "ok");

    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().display().to_string();
    let created =
        c.run(&RunRequest { scenario: MINIMAL.into(), seed: Some(3), run_dir: Some(run_dir.clone()) }).await.unwrap();
    assert_eq!(created.report.seed, 3);
    assert_eq!(c.report(created.id).await.unwrap(), created.report);
    assert!(c.chain_log(created.id).await.unwrap().starts_with("0\t"));

    let anchors = std::fs::read_to_string(dir.path().join(ANCHORS)).unwrap();
    for line in anchors.lines() {
        let hash: Hash32 = line.split('\t').next().unwrap().parse().unwrap();
        assert_eq!(c.verify(&run_dir, hash).await.unwrap().verdict, Verdict::Valid);
    }

    let corpus = c.corpus(&CorpusRequest { class: "tod".into(), count: 2, seed: 1 }).await.unwrap();
    assert_eq!(corpus.instances.len(), 4);
}

#[tokio::test(flavor = "multi_thread")]
async fn api_errors_carry_their_kind() {
    let c = client().await;
    let e = c.run(&RunRequest { scenario: "[]".into(), seed: None, run_dir: None }).await.unwrap_err();
    assert!(matches!(&e, ClientError::Api { status: 400, .. }), "{e:?}");
    assert_eq!(e.kind(), Some(ErrorKind::Parse));
    assert_eq!(c.report(7).await.unwrap_err().kind(), Some(ErrorKind::NotFound));
    assert_eq!(c.chain_log(7).await.unwrap_err().kind(), Some(ErrorKind::NotFound));
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let c = Client::new("http://127.0.0.1:9");
    assert!(matches!(c.health().await, Err(ClientError::Transport(_))));
}
