//! Test support for the CLI: a synthetic corpus builder and a runner for the
//! compiled binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cryptorisk")
}

pub fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A scratch directory that cleans up after itself.
pub struct Scratch {
    pub path: PathBuf,
}

impl Scratch {
    pub fn new(tag: &str) -> Scratch {
        let path = std::env::temp_dir().join(format!(
            "cryptorisk-test-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        fs::create_dir_all(&path).unwrap();
        Scratch { path }
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        let p = self.path.join(name);
        fs::create_dir_all(&p).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.path);
    }
}

fn ecb_exfil_app(app: &str, class: &str) -> String {
    format!(
        r#"{{
  "ceir_version": 1,
  "app_id": "{app}",
  "classes": [{{
    "name": "{class}",
    "methods": [
      {{
        "signature": "{class}.encrypt(byte[])",
        "params": [{{"name": "data", "type": "byte[]"}}],
        "body": [
          {{"id": 0, "op": "const", "dst": "alg", "value": "AES", "type": "java.lang.String"}},
          {{"id": 1, "op": "call", "dst": "kg", "callee": "javax.crypto.KeyGenerator.getInstance(java.lang.String)", "args": ["alg"]}},
          {{"id": 2, "op": "call", "dst": "key", "callee": "javax.crypto.KeyGenerator.generateKey()", "receiver": "kg", "args": []}},
          {{"id": 3, "op": "call", "dst": "c", "callee": "javax.crypto.Cipher.getInstance(java.lang.String)", "args": ["alg"]}},
          {{"id": 4, "op": "const", "dst": "mode", "value": 1, "type": "int"}},
          {{"id": 5, "op": "call", "callee": "javax.crypto.Cipher.init(int,java.security.Key)", "receiver": "c", "args": ["mode", "key"]}},
          {{"id": 6, "op": "call", "dst": "ct", "callee": "javax.crypto.Cipher.doFinal(byte[])", "receiver": "c", "args": ["data"]}},
          {{"id": 7, "op": "return", "value": "ct"}}
        ]
      }},
      {{
        "signature": "{class}.send(byte[])",
        "params": [{{"name": "data", "type": "byte[]"}}],
        "body": [
          {{"id": 0, "op": "call", "dst": "ct", "callee": "{class}.encrypt(byte[])", "args": ["data"]}},
          {{"id": 1, "op": "const", "dst": "addr", "value": "https://upload.example.com", "type": "java.lang.String"}},
          {{"id": 2, "op": "call", "dst": "url", "callee": "java.net.URL.<init>(java.lang.String)", "args": ["addr"]}},
          {{"id": 3, "op": "call", "dst": "conn", "callee": "java.net.URL.openConnection()", "receiver": "url", "args": []}},
          {{"id": 4, "op": "call", "dst": "os", "callee": "java.net.HttpURLConnection.getOutputStream()", "receiver": "conn", "args": []}},
          {{"id": 5, "op": "call", "dst": "out", "callee": "java.io.DataOutputStream.<init>(java.io.OutputStream)", "args": ["os"]}},
          {{"id": 6, "op": "call", "callee": "java.io.DataOutputStream.write(byte[])", "receiver": "out", "args": ["ct"]}}
        ]
      }},
      {{
        "signature": "{class}.save(byte[])",
        "params": [{{"name": "data", "type": "byte[]"}}],
        "body": [
          {{"id": 0, "op": "call", "dst": "ct", "callee": "{class}.encrypt(byte[])", "args": ["data"]}},
          {{"id": 1, "op": "const", "dst": "path", "value": "/sdcard/cache.bin", "type": "java.lang.String"}},
          {{"id": 2, "op": "call", "dst": "fos", "callee": "java.io.FileOutputStream.<init>(java.lang.String)", "args": ["path"]}},
          {{"id": 3, "op": "call", "callee": "java.io.FileOutputStream.write(byte[])", "receiver": "fos", "args": ["ct"]}}
        ]
      }}
    ]
  }}],
  "entry_methods": ["{class}.send(byte[])"],
  "externals": [
    "javax.crypto.KeyGenerator.getInstance(java.lang.String)",
    "javax.crypto.KeyGenerator.generateKey()",
    "javax.crypto.Cipher.getInstance(java.lang.String)",
    "javax.crypto.Cipher.init(int,java.security.Key)",
    "javax.crypto.Cipher.doFinal(byte[])",
    "java.net.URL.<init>(java.lang.String)",
    "java.net.URL.openConnection()",
    "java.net.HttpURLConnection.getOutputStream()",
    "java.io.DataOutputStream.<init>(java.io.OutputStream)",
    "java.io.DataOutputStream.write(byte[])",
    "java.io.FileOutputStream.<init>(java.lang.String)",
    "java.io.FileOutputStream.write(byte[])"
  ]
}}"#
    )
}

fn weak_hash_logger_app(app: &str, class: &str) -> String {
    format!(
        r#"{{
  "ceir_version": 1,
  "app_id": "{app}",
  "classes": [{{
    "name": "{class}",
    "methods": [{{
      "signature": "{class}.fingerprint(byte[])",
      "params": [{{"name": "data", "type": "byte[]"}}],
      "body": [
        {{"id": 0, "op": "const", "dst": "alg", "value": "MD5", "type": "java.lang.String"}},
        {{"id": 1, "op": "call", "dst": "md", "callee": "java.security.MessageDigest.getInstance(java.lang.String)", "args": ["alg"]}},
        {{"id": 2, "op": "call", "dst": "hash", "callee": "java.security.MessageDigest.digest(byte[])", "receiver": "md", "args": ["data"]}},
        {{"id": 3, "op": "call", "dst": "hex", "callee": "com.corpus.util.Hex.encode(byte[])", "args": ["hash"]}},
        {{"id": 4, "op": "const", "dst": "tag", "value": "fp", "type": "java.lang.String"}},
        {{"id": 5, "op": "call", "callee": "android.util.Log.d(java.lang.String,java.lang.String)", "args": ["tag", "hex"]}}
      ]
    }}]
  }}],
  "entry_methods": ["{class}.fingerprint(byte[])"],
  "externals": [
    "java.security.MessageDigest.getInstance(java.lang.String)",
    "java.security.MessageDigest.digest(byte[])",
    "com.corpus.util.Hex.encode(byte[])",
    "android.util.Log.d(java.lang.String,java.lang.String)"
  ]
}}"#
    )
}

fn seeded_random_app(app: &str, class: &str) -> String {
    format!(
        r#"{{
  "ceir_version": 1,
  "app_id": "{app}",
  "classes": [{{
    "name": "{class}",
    "methods": [{{
      "signature": "{class}.token()",
      "params": [],
      "body": [
        {{"id": 0, "op": "call", "dst": "rng", "callee": "java.security.SecureRandom.<init>()", "args": []}},
        {{"id": 1, "op": "const", "dst": "seed", "value": 1234, "type": "long"}},
        {{"id": 2, "op": "call", "callee": "java.security.SecureRandom.setSeed(long)", "receiver": "rng", "args": ["seed"]}},
        {{"id": 3, "op": "call", "dst": "value", "callee": "java.security.SecureRandom.nextInt()", "receiver": "rng", "args": []}},
        {{"id": 4, "op": "call", "dst": "text", "callee": "java.lang.String.valueOf(int)", "args": ["value"]}},
        {{"id": 5, "op": "const", "dst": "tag", "value": "token", "type": "java.lang.String"}},
        {{"id": 6, "op": "call", "callee": "android.util.Log.i(java.lang.String,java.lang.String)", "args": ["tag", "text"]}}
      ]
    }}]
  }}],
  "entry_methods": ["{class}.token()"],
  "externals": [
    "java.security.SecureRandom.<init>()",
    "java.security.SecureRandom.setSeed(long)",
    "java.security.SecureRandom.nextInt()",
    "java.lang.String.valueOf(int)",
    "android.util.Log.i(java.lang.String,java.lang.String)"
  ]
}}"#
    )
}

fn weak_pbe_storage_app(app: &str, class: &str) -> String {
    format!(
        r#"{{
  "ceir_version": 1,
  "app_id": "{app}",
  "classes": [{{
    "name": "{class}",
    "methods": [{{
      "signature": "{class}.persist(byte[],javax.crypto.SecretKey)",
      "params": [
        {{"name": "data", "type": "byte[]"}},
        {{"name": "key", "type": "javax.crypto.SecretKey"}}
      ],
      "body": [
        {{"id": 0, "op": "const", "dst": "salt", "value": "a1b2", "type": "byte[]"}},
        {{"id": 1, "op": "const", "dst": "rounds", "value": 100, "type": "int"}},
        {{"id": 2, "op": "call", "dst": "spec", "callee": "javax.crypto.spec.PBEParameterSpec.<init>(byte[],int)", "args": ["salt", "rounds"]}},
        {{"id": 3, "op": "const", "dst": "t", "value": "AES/CBC/PKCS5Padding", "type": "java.lang.String"}},
        {{"id": 4, "op": "call", "dst": "c", "callee": "javax.crypto.Cipher.getInstance(java.lang.String)", "args": ["t"]}},
        {{"id": 5, "op": "const", "dst": "mode", "value": 1, "type": "int"}},
        {{"id": 6, "op": "call", "callee": "javax.crypto.Cipher.init(int,java.security.Key,java.security.spec.AlgorithmParameterSpec)", "receiver": "c", "args": ["mode", "key", "spec"]}},
        {{"id": 7, "op": "call", "dst": "ct", "callee": "javax.crypto.Cipher.doFinal(byte[])", "receiver": "c", "args": ["data"]}},
        {{"id": 8, "op": "call", "dst": "text", "callee": "android.util.Base64.encodeToString(byte[],int)", "args": ["ct", "mode"]}},
        {{"id": 9, "op": "const", "dst": "pref", "value": "secret", "type": "java.lang.String"}},
        {{"id": 10, "op": "call", "dst": "editor", "callee": "com.corpus.util.Prefs.editor()", "args": []}},
        {{"id": 11, "op": "call", "callee": "android.content.SharedPreferences$Editor.putString(java.lang.String,java.lang.String)", "receiver": "editor", "args": ["pref", "text"]}}
      ]
    }}]
  }}],
  "entry_methods": ["{class}.persist(byte[],javax.crypto.SecretKey)"],
  "externals": [
    "javax.crypto.spec.PBEParameterSpec.<init>(byte[],int)",
    "javax.crypto.Cipher.getInstance(java.lang.String)",
    "javax.crypto.Cipher.init(int,java.security.Key,java.security.spec.AlgorithmParameterSpec)",
    "javax.crypto.Cipher.doFinal(byte[])",
    "android.util.Base64.encodeToString(byte[],int)",
    "com.corpus.util.Prefs.editor()",
    "android.content.SharedPreferences$Editor.putString(java.lang.String,java.lang.String)"
  ]
}}"#
    )
}

fn plain_app(app: &str, class: &str) -> String {
    format!(
        r#"{{
  "ceir_version": 1,
  "app_id": "{app}",
  "classes": [{{
    "name": "{class}",
    "methods": [{{
      "signature": "{class}.greet()",
      "params": [],
      "body": [
        {{"id": 0, "op": "const", "dst": "msg", "value": "hello", "type": "java.lang.String"}},
        {{"id": 1, "op": "call", "dst": "n", "callee": "java.lang.String.length()", "receiver": "msg", "args": []}},
        {{"id": 2, "op": "return", "value": "n"}}
      ]
    }}]
  }}],
  "entry_methods": ["{class}.greet()"],
  "externals": ["java.lang.String.length()"]
}}"#
    )
}

fn report(detector: &str, app: &str, findings: &str) -> String {
    format!(
        r#"{{"report_version": 1, "detector": "{detector}", "app_id": "{app}", "findings": [{findings}]}}"#
    )
}

/// Writes a 25-app corpus with planted misuse variety plus matching external
/// reports; returns (programs dir, reports dir).
pub fn write_corpus(root: &Path) -> (PathBuf, PathBuf) {
    let programs = root.join("programs");
    let reports = root.join("reports");
    fs::create_dir_all(&programs).unwrap();
    fs::create_dir_all(&reports).unwrap();

    for i in 0..25 {
        let app = format!("app-{i:02}");
        let class = format!("com.corpus.a{i}.Main");
        let (program, app_reports): (String, Vec<(String, String)>) = match i % 5 {
            0 => {
                let program = ecb_exfil_app(&app, &class);
                let loc = format!(r#"{{"method": "{class}.encrypt(byte[])", "stmt": 3}}"#);
                let cg = report(
                    "CG",
                    &app,
                    &format!(
                        r#"{{"err": "vul.11", "m": "javax.crypto.Cipher.getInstance(java.lang.String)", "p": "{class}.encrypt(byte[])", "d": "found ECB misuse", "loc": {loc}}}"#
                    ),
                );
                let cc = report(
                    "CC",
                    &app,
                    &format!(
                        r#"{{"err": "ConstraintError", "m": "javax.crypto.Cipher.getInstance(java.lang.String)", "p": "{class}.encrypt(byte[])", "d": "transformation uses ECB", "loc": {loc}}}"#
                    ),
                );
                let bs = report(
                    "BS",
                    &app,
                    &format!(
                        r#"{{"err": "Rule 1", "m": "javax.crypto.Cipher.getInstance(java.lang.String)", "p": "{class}.encrypt(byte[])", "d": "ECB", "loc": {loc}}}"#
                    ),
                );
                (
                    program,
                    vec![("cg".into(), cg), ("cc".into(), cc), ("bs".into(), bs)],
                )
            }
            1 => {
                let program = weak_hash_logger_app(&app, &class);
                let loc = format!(r#"{{"method": "{class}.fingerprint(byte[])", "stmt": 1}}"#);
                let cc = report(
                    "CC",
                    &app,
                    &format!(
                        r#"{{"err": "ConstraintError", "m": "java.security.MessageDigest.getInstance(java.lang.String)", "p": "{class}.fingerprint(byte[])", "d": "MD5 is not allowed", "loc": {loc}}}"#
                    ),
                );
                (program, vec![("cc".into(), cc)])
            }
            2 => {
                let program = seeded_random_app(&app, &class);
                let loc = format!(r#"{{"method": "{class}.token()", "stmt": 2}}"#);
                let cg = report(
                    "CG",
                    &app,
                    &format!(
                        r#"{{"err": "vul.8", "m": "java.security.SecureRandom.setSeed(long)", "p": "{class}.token()", "d": "constant seed", "loc": {loc}}}"#
                    ),
                );
                (program, vec![("cg".into(), cg)])
            }
            3 => {
                let program = weak_pbe_storage_app(&app, &class);
                let loc = format!(
                    r#"{{"method": "{class}.persist(byte[],javax.crypto.SecretKey)", "stmt": 2}}"#
                );
                let cc = report(
                    "CC",
                    &app,
                    &format!(
                        r#"{{"err": "RequiredPredicateError", "m": "javax.crypto.spec.PBEParameterSpec.<init>(byte[],int)", "p": "{class}.persist(byte[],javax.crypto.SecretKey)", "d": "static salt", "loc": {loc}}}"#
                    ),
                );
                (program, vec![("cc".into(), cc)])
            }
            _ => (plain_app(&app, &class), vec![]),
        };

        fs::write(programs.join(format!("{app}.json")), program).unwrap();
        for (detector, text) in app_reports {
            fs::write(reports.join(format!("{app}.{detector}.json")), text).unwrap();
        }
    }
    (programs, reports)
}

/// Byte-compares two directory trees.
pub fn assert_trees_identical(a: &Path, b: &Path) {
    let list = |root: &Path| -> Vec<PathBuf> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        files.sort();
        files
    };
    let files_a = list(a);
    let files_b = list(b);
    assert_eq!(
        files_a, files_b,
        "different file sets under {a:?} and {b:?}"
    );
    for rel in files_a {
        let ca = fs::read(a.join(&rel)).unwrap();
        let cb = fs::read(b.join(&rel)).unwrap();
        assert_eq!(ca, cb, "file {rel:?} differs");
    }
}
