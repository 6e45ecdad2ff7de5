//! Built-in rule-based misuse detector over CEIR, detector id `BI`.
//!
//! Each rule maps one vulnerability type to a decidable check:
//!
//! * constant-argument rules (keys, passwords, seeds, salts, IVs) fire only
//!   when every reaching definition of the inspected argument is the same
//!   literal;
//! * algorithm-string rules parse the `alg/mode/padding` transformation with
//!   a missing mode defaulting to ECB, and degrade to the "suspected usage"
//!   type 21 when the string cannot be resolved statically;
//! * structural rules (custom verifiers, trust managers, socket factories)
//!   match class-hierarchy evidence and are known to over-report permissive
//!   implementations they cannot distinguish from strict ones;
//! * the call-sequence rule walks a per-object typestate over the ordered
//!   statement list;
//! * the incomplete-usage rule fires when a factory result reaches no
//!   finalizing call and provably does not escape the method.

use crate::constprop::{constant_arg, ConstValue};
use crate::ir::{class_of_signature, simple_name, Literal, Loc, MethodDef, Program, StatementKind};
use crate::misuse::MisuseTuple;
use crate::taxonomy::VulnId;

pub const BUILT_IN_DETECTOR: &str = "BI";

const WEAK_HASHES: &[&str] = &["MD2", "MD4", "MD5", "SHA", "SHA1", "SHA-1"];
const EXPIRED_PROTOCOLS: &[&str] = &[
    "SSL", "SSLV2", "SSLV3", "TLS", "TLSV1", "TLSV1.0", "TLSV1.1",
];
const SYMMETRIC_BLOCK_ALGS: &[&str] = &[
    "AES", "DES", "DESEDE", "BLOWFISH", "IDEA", "RC2", "RC5", "CAMELLIA", "SEED", "TWOFISH",
];
const SMALL_BLOCK_ALGS: &[&str] = &["DES", "DESEDE", "IDEA", "BLOWFISH", "RC4", "ARCFOUR", "RC2"];
const FORBIDDEN_CONSTRUCTORS: &[&str] = &["javax.crypto.spec.PBEKeySpec.<init>(char[])"];

/// `(class, factory simple name)` paired with the calls that complete a usage.
const USAGE_FAMILIES: &[(&str, &[&str])] = &[
    ("javax.crypto.Cipher", &["doFinal", "wrap"]),
    ("java.security.MessageDigest", &["digest"]),
    ("javax.crypto.Mac", &["doFinal"]),
    ("java.security.Signature", &["sign"]),
    ("javax.crypto.KeyGenerator", &["generateKey"]),
];

fn vid(id: u8) -> VulnId {
    VulnId::new(id).expect("built-in rule ids are in range")
}

/// Runs every built-in rule over the program. Pure: the same program always
/// yields the same tuple list, sorted by (method, statement, id, api).
pub fn detect(program: &Program) -> Vec<MisuseTuple> {
    let mut tuples = Vec::new();
    for method in program.methods() {
        for stmt in &method.body {
            let StatementKind::Call { callee, args, .. } = &stmt.kind else {
                continue;
            };
            let loc = Loc::new(method.signature.clone(), stmt.id);
            check_call(program, method, callee, args.len(), &loc, &mut tuples);
        }
        check_typestate(method, &mut tuples);
        check_incomplete_usage(method, &mut tuples);
    }
    check_structural(program, &mut tuples);

    tuples.sort_by(|a, b| {
        (&a.loc.method, a.loc.stmt, a.id, &a.api).cmp(&(&b.loc.method, b.loc.stmt, b.id, &b.api))
    });
    tuples
}

fn emit(tuples: &mut Vec<MisuseTuple>, api: &str, id: u8, parent: &str, d: String, loc: &Loc) {
    tuples.push(MisuseTuple::new(
        api,
        vid(id),
        parent,
        d,
        BUILT_IN_DETECTOR,
        loc.clone(),
    ));
}

fn emit_suspected(tuples: &mut Vec<MisuseTuple>, api: &str, parent: &str, arg: usize, loc: &Loc) {
    emit(
        tuples,
        api,
        21,
        parent,
        format!(
            "argument {arg} of {} could not be resolved statically; needs testing",
            api
        ),
        loc,
    );
}

fn check_call(
    program: &Program,
    method: &MethodDef,
    callee: &str,
    arg_count: usize,
    loc: &Loc,
    tuples: &mut Vec<MisuseTuple>,
) {
    let Some(class) = class_of_signature(callee) else {
        return;
    };
    let Some(name) = simple_name(callee) else {
        return;
    };
    let parent = &method.signature;
    let arg = |i: usize| constant_arg(program, loc, i).unwrap_or(ConstValue::NonConstant);

    // Constant-predicate rules: fire only on resolved literals.
    let constant_rules: &[(&str, &str, usize, u8, &str)] = &[
        (
            "javax.crypto.spec.SecretKeySpec",
            "<init>",
            0,
            1,
            "constant key material",
        ),
        (
            "javax.crypto.spec.PBEKeySpec",
            "<init>",
            0,
            2,
            "constant PBE password",
        ),
        (
            "java.security.SecureRandom",
            "setSeed",
            0,
            9,
            "constant PRNG seed",
        ),
        (
            "java.security.SecureRandom",
            "<init>",
            0,
            9,
            "constant PRNG seed",
        ),
        (
            "javax.crypto.spec.PBEParameterSpec",
            "<init>",
            0,
            11,
            "constant PBE salt",
        ),
        (
            "javax.crypto.spec.IvParameterSpec",
            "<init>",
            0,
            13,
            "constant initialization vector",
        ),
    ];
    for &(rclass, rname, idx, id, what) in constant_rules {
        if class == rclass && name == rname && arg_count > idx {
            if let ConstValue::Literal(lit) = arg(idx) {
                emit(tuples, callee, id, parent, format!("{what} {lit}"), loc);
            }
        }
    }

    // KeyStore passwords sit at index 1 of load/getKey.
    if class == "java.security.KeyStore" && (name == "load" || name == "getKey") && arg_count > 1 {
        if let ConstValue::Literal(lit) = arg(1) {
            emit(
                tuples,
                callee,
                3,
                parent,
                format!("constant KeyStore password {lit}"),
                loc,
            );
        }
    }

    // Static salts via the multi-argument PBEKeySpec constructors.
    if class == "javax.crypto.spec.PBEKeySpec" && name == "<init>" && arg_count >= 3 {
        if let ConstValue::Literal(lit) = arg(1) {
            emit(
                tuples,
                callee,
                11,
                parent,
                format!("constant PBE salt {lit}"),
                loc,
            );
        }
        match arg(2) {
            ConstValue::Literal(Literal::Int(n)) if n < 1000 => {
                emit(
                    tuples,
                    callee,
                    14,
                    parent,
                    format!("{n} PBE iterations, below 1,000"),
                    loc,
                );
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 2, loc),
        }
    }

    if class == "javax.crypto.spec.PBEParameterSpec" && name == "<init>" && arg_count > 1 {
        match arg(1) {
            ConstValue::Literal(Literal::Int(n)) if n < 1000 => {
                emit(
                    tuples,
                    callee,
                    14,
                    parent,
                    format!("{n} PBE iterations, below 1,000"),
                    loc,
                );
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 1, loc),
        }
    }

    if class == "javax.crypto.Cipher" && name == "getInstance" && arg_count > 0 {
        match arg(0) {
            ConstValue::Literal(Literal::Str(t)) => {
                check_transformation(tuples, callee, parent, &t, loc)
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 0, loc),
        }
    }

    if class == "java.security.MessageDigest" && name == "getInstance" && arg_count > 0 {
        match arg(0) {
            ConstValue::Literal(Literal::Str(alg)) => {
                if WEAK_HASHES.contains(&alg.to_uppercase().as_str()) {
                    emit(
                        tuples,
                        callee,
                        17,
                        parent,
                        format!("insecure hash algorithm {alg:?}"),
                        loc,
                    );
                }
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 0, loc),
        }
    }

    if class == "javax.net.ssl.SSLContext" && name == "getInstance" && arg_count > 0 {
        match arg(0) {
            ConstValue::Literal(Literal::Str(proto)) => {
                if EXPIRED_PROTOCOLS.contains(&proto.to_uppercase().as_str()) {
                    emit(
                        tuples,
                        callee,
                        8,
                        parent,
                        format!("expired protocol {proto:?} requested from SSLContext"),
                        loc,
                    );
                }
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 0, loc),
        }
    }

    if class == "java.security.KeyPairGenerator" && name == "initialize" && arg_count > 0 {
        match arg(0) {
            ConstValue::Literal(Literal::Int(bits)) if bits < 2048 => {
                emit(
                    tuples,
                    callee,
                    16,
                    parent,
                    format!("asymmetric key size {bits} below 2048"),
                    loc,
                );
            }
            ConstValue::Literal(_) => {}
            ConstValue::NonConstant => emit_suspected(tuples, callee, parent, 0, loc),
        }
    }

    if class == "java.net.URL" && name == "<init>" && arg_count > 0 {
        if let Some(url) = arg(0).as_str() {
            if url.starts_with("http://") {
                emit(
                    tuples,
                    callee,
                    7,
                    parent,
                    format!("plain HTTP endpoint {url:?}"),
                    loc,
                );
            }
        }
    }

    if class == "java.util.Random" && name == "<init>" {
        emit(
            tuples,
            callee,
            10,
            parent,
            "java.util.Random is not a cryptographically secure PRNG".to_string(),
            loc,
        );
    }

    if FORBIDDEN_CONSTRUCTORS.contains(&callee) {
        emit(
            tuples,
            callee,
            19,
            parent,
            "password-only PBEKeySpec constructor is forbidden".to_string(),
            loc,
        );
    }
}

fn check_transformation(
    tuples: &mut Vec<MisuseTuple>,
    callee: &str,
    parent: &str,
    t: &str,
    loc: &Loc,
) {
    let parts: Vec<&str> = t.split('/').collect();
    let alg = parts[0].trim().to_uppercase();
    let mode = parts.get(1).map(|m| m.trim().to_uppercase());
    let padding = parts.get(2).map(|p| p.trim().to_uppercase());

    if SYMMETRIC_BLOCK_ALGS.contains(&alg.as_str()) {
        let effective_mode = mode.clone().unwrap_or_else(|| "ECB".to_string());
        if effective_mode == "ECB" {
            let why = if mode.is_none() { " by default" } else { "" };
            emit(
                tuples,
                callee,
                12,
                parent,
                format!("transformation {t:?} applies ECB mode{why}"),
                loc,
            );
        }
    }
    if SMALL_BLOCK_ALGS.contains(&alg.as_str()) {
        emit(
            tuples,
            callee,
            15,
            parent,
            format!("64-bit block cipher {alg:?}"),
            loc,
        );
    }
    if alg == "RSA" {
        let unpadded = padding.as_deref().is_none_or(|p| p == "NOPADDING");
        if unpadded {
            emit(
                tuples,
                callee,
                16,
                parent,
                format!("RSA transformation {t:?} without OAEP padding"),
                loc,
            );
        }
    }
}

/// Cipher typestate: getInstance → init → doFinal, scanned over the ordered
/// statement list. Branches are ignored, so reordering across a jump is not
/// caught; a doFinal on a never-initialized object is.
fn check_typestate(method: &MethodDef, tuples: &mut Vec<MisuseTuple>) {
    #[derive(PartialEq, Clone, Copy)]
    enum St {
        Fresh,
        Inited,
    }
    let mut states: std::collections::BTreeMap<&str, St> = Default::default();

    for stmt in &method.body {
        match &stmt.kind {
            StatementKind::Call {
                dst,
                callee,
                receiver,
                ..
            } => {
                let class = class_of_signature(callee).unwrap_or("");
                let name = simple_name(callee).unwrap_or("");
                if class == "javax.crypto.Cipher" && name == "getInstance" {
                    if let Some(d) = dst {
                        states.insert(d, St::Fresh);
                    }
                } else if class == "javax.crypto.Cipher" && name == "init" {
                    if let Some(r) = receiver {
                        if let Some(s) = states.get_mut(r.as_str()) {
                            *s = St::Inited;
                        }
                    }
                } else if class == "javax.crypto.Cipher" && (name == "doFinal" || name == "update")
                {
                    if let Some(r) = receiver {
                        if states.get(r.as_str()) == Some(&St::Fresh) {
                            emit(
                                tuples,
                                callee,
                                18,
                                &method.signature,
                                format!("{name} called before init on an uninitialized Cipher"),
                                &Loc::new(method.signature.clone(), stmt.id),
                            );
                        }
                    }
                }
            }
            StatementKind::Assign { dst, src } => {
                if let Some(s) = states.get(src.as_str()).copied() {
                    states.insert(dst, s);
                }
            }
            _ => {}
        }
    }
}

fn check_incomplete_usage(method: &MethodDef, tuples: &mut Vec<MisuseTuple>) {
    for stmt in &method.body {
        let StatementKind::Call { dst, callee, .. } = &stmt.kind else {
            continue;
        };
        let class = class_of_signature(callee).unwrap_or("");
        let name = simple_name(callee).unwrap_or("");
        let Some((family_class, finalizers)) = USAGE_FAMILIES
            .iter()
            .find(|(c, _)| *c == class && name == "getInstance")
        else {
            continue;
        };

        let loc = Loc::new(method.signature.clone(), stmt.id);
        let Some(root) = dst else {
            // Result dropped on the floor: trivially incomplete.
            emit(
                tuples,
                callee,
                20,
                &method.signature,
                format!("{family_class} instance is discarded without use"),
                &loc,
            );
            continue;
        };

        // Copy-closure of the factory result within this method.
        let mut aliases: std::collections::BTreeSet<&str> = [root.as_str()].into();
        let mut grew = true;
        while grew {
            grew = false;
            for s in &method.body {
                if let StatementKind::Assign { dst, src } = &s.kind {
                    if aliases.contains(src.as_str()) && aliases.insert(dst) {
                        grew = true;
                    }
                }
            }
        }

        let mut finalized = false;
        let mut escapes = false;
        for s in &method.body {
            match &s.kind {
                StatementKind::Call {
                    callee: c,
                    receiver,
                    args,
                    ..
                } => {
                    if s.id == stmt.id {
                        continue;
                    }
                    if let Some(r) = receiver {
                        if aliases.contains(r.as_str()) {
                            let cname = simple_name(c).unwrap_or("");
                            let cclass = class_of_signature(c).unwrap_or("");
                            if cclass == *family_class && finalizers.contains(&cname) {
                                finalized = true;
                            }
                        }
                    }
                    if args.iter().any(|a| aliases.contains(a.as_str())) {
                        escapes = true;
                    }
                }
                StatementKind::FieldStore { value, .. } => {
                    if aliases.contains(value.as_str()) {
                        escapes = true;
                    }
                }
                StatementKind::Return { value: Some(v) } if aliases.contains(v.as_str()) => {
                    escapes = true;
                }
                _ => {}
            }
        }

        if !finalized && !escapes {
            emit(
                tuples,
                callee,
                20,
                &method.signature,
                format!("{family_class} instance never reaches a finalizing call"),
                &loc,
            );
        }
    }
}

fn check_structural(program: &Program, tuples: &mut Vec<MisuseTuple>) {
    for class in &program.classes {
        let anchor = |m: &MethodDef| {
            Loc::new(
                m.signature.clone(),
                m.body.first().map(|s| s.id).unwrap_or(0),
            )
        };

        if class
            .implements
            .iter()
            .any(|i| i == "javax.net.ssl.HostnameVerifier")
        {
            for method in &class.methods {
                if simple_name(&method.signature) == Some("verify") {
                    emit(
                        tuples,
                        "javax.net.ssl.HostnameVerifier.verify(java.lang.String,javax.net.ssl.SSLSession)",
                        4,
                        &method.signature,
                        format!("{} overrides hostname verification", class.name),
                        &anchor(method),
                    );
                }
            }
        }

        if class
            .implements
            .iter()
            .any(|i| i == "javax.net.ssl.X509TrustManager")
        {
            for method in &class.methods {
                if let Some(n @ ("checkServerTrusted" | "checkClientTrusted")) =
                    simple_name(&method.signature)
                {
                    emit(
                        tuples,
                        &format!("javax.net.ssl.X509TrustManager.{n}(java.security.cert.X509Certificate[],java.lang.String)"),
                        5,
                        &method.signature,
                        format!("{} overrides certificate validation", class.name),
                        &anchor(method),
                    );
                }
            }
        }

        if class.extends.as_deref() == Some("javax.net.ssl.SSLSocketFactory") {
            let verifies = class.methods.iter().any(|m| {
                m.body.iter().any(|s| match &s.kind {
                    StatementKind::Call { callee, .. } => simple_name(callee) == Some("verify"),
                    _ => false,
                })
            });
            if !verifies {
                if let Some(method) = class.methods.first() {
                    emit(
                        tuples,
                        "javax.net.ssl.SSLSocketFactory.createSocket(java.lang.String,int)",
                        6,
                        &method.signature,
                        format!(
                            "{} extends SSLSocketFactory without hostname verification",
                            class.name
                        ),
                        &anchor(method),
                    );
                }
            }
        }
    }
}
