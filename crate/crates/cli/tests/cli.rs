use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const PROMPT: &str = "obj(table,120,60,75); obj(cup,8,8,10); obj(book,24,17,3); \
                      rel(table,under,cup); rel(book,left_on,table); \
                      truth(cup,on,table); truth(book,left_on,table)";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causalstruct"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("CAUSALSTRUCT_API_KEY").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["generate", "-p", PROMPT, "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "scene.json",
        "layout.json",
        "front.svg",
        "side.svg",
        "top.svg",
        "threequarter.svg",
        "pid_trace.txt",
        "diagnostics.txt",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let scene = fs::read_to_string(out.join("scene.json")).unwrap();
    assert!(scene.contains("\"cup-1\",\n      \"on\",\n      \"table-1\""), "{scene}");
}

#[test]
fn generate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run(&["generate", "-p", PROMPT, "-o", p(&a)])), 0);
    assert_eq!(code(&run(&["generate", "-p", PROMPT, "-o", p(&b)])), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn prompt_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "-p", "obj(table", "-o", p(dir.path())]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grammar"));
    let note = fs::read_to_string(dir.path().join("failure.txt")).unwrap();
    assert!(note.starts_with("stage: parse"));
}

#[test]
fn unreachable_oracle_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[oracle]\nbackend = \"remote\"\n[oracle.remote]\nendpoint = \"http://127.0.0.1:9/v1\"\n\
         timeout_s = 2\nmax_retries = 0\nbackoff_base_s = 0\n",
    )
    .unwrap();
    let o = run(&["generate", "-p", "a table and a cup", "-c", p(&cfg), "-o", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let note = fs::read_to_string(dir.path().join("o/failure.txt")).unwrap();
    assert!(note.starts_with("stage: parse"));
}

#[test]
fn misfit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "generate",
        "-p",
        "obj(box,10,10,10); obj(chair,50,50,90); rel(chair,in,box)",
        "-o",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(dir.path().join("failure.txt")).unwrap().contains("stage: place"));
    assert!(dir.path().join("scene.json").is_file());
}

#[test]
fn render_export_edit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&run(&["generate", "-p", PROMPT, "-o", p(&out)])), 0);
    let scene = out.join("scene.json");

    let o = run(&["render", p(&scene), "--view", "front"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("<svg"));
    assert_eq!(code(&run(&["render", p(&scene), "--view", "sideways"])), 3);
    assert_eq!(code(&run(&["edit", p(&scene)])), 3);
    assert_eq!(code(&run(&["--version"])), 0);

    let o = run(&["export", p(&scene), "--fscene"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text, fs::read_to_string(out.join("layout.json")).unwrap());

    let edited = dir.path().join("edited");
    let o = run(&["edit", p(&scene), "--add", "lamp,20,20,45,right_on,table-1", "-o", p(&edited)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let layout = fs::read_to_string(edited.join("layout.json")).unwrap();
    assert!(layout.contains("lamp-1"));

    let o = run(&["edit", p(&edited.join("scene.json")), "--remove", "sofa"]);
    assert_eq!(code(&o), 3);
    let o = run(&["edit", p(&edited.join("scene.json")), "--move", "cup-1,beside,table-1"]);
    assert_eq!(code(&o), 3);

    let relaid = dir.path().join("relaid");
    assert_eq!(code(&run(&["layout", p(&scene), "-o", p(&relaid)])), 0);
    let refined = dir.path().join("refined");
    assert_eq!(code(&run(&["refine", p(&scene), "-o", p(&refined)])), 0);
    assert_eq!(
        fs::read_to_string(relaid.join("layout.json")).unwrap(),
        fs::read_to_string(out.join("layout.json")).unwrap()
    );
}
