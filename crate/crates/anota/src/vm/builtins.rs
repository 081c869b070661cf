//! Builtin functions. Effectful ones go through `sys_enter`/`sys_exit` so
//! the syscall monitor sees them; pure ones compute directly.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::compile::Builtin;
use super::interp::{OpenFile, Step, Vm};
use super::url::{resolve_connect, urlparse};
use super::value::{Kind, Value};
use crate::syscall::{normalize_path, ArgKind, ArgValue, EventArg};

const ENOENT: i64 = -2;
const EBADF: i64 = -9;
const EEXIST: i64 = -17;
const EISDIR: i64 = -21;

impl Vm<'_> {
    pub(super) fn builtin(&mut self, b: Builtin, args: Vec<Value>, pc: u32) -> Step<Value> {
        match b {
            Builtin::Open => {
                let path = normalize_path(self.str_arg(&args[0], "open", pc)?);
                let mode = match args.get(1) {
                    Some(m) => self.str_arg(m, "open", pc)?.to_string(),
                    None => "r".to_string(),
                };
                self.open(&path, &mode, pc)
            }
            Builtin::Read => {
                let fd = self.fd_arg(&args[0], "read", pc)?;
                let seq = self.sys_enter("read", vec![EventArg::fd(fd)], pc)?;
                let out = match self.open_files.get_mut(&fd) {
                    Some(OpenFile::File { path, pos, .. }) => {
                        let content = self.vfs.get(path).unwrap_or("");
                        let start = (*pos).min(content.len());
                        let data = content.get(start..).unwrap_or("").to_string();
                        *pos = content.len();
                        Value::str(&data)
                    }
                    Some(OpenFile::Socket) => Value::str(""),
                    None => Value::int(EBADF),
                };
                let ret = match &out.kind {
                    Kind::Str(s) => s.len() as i64,
                    _ => EBADF,
                };
                self.sys_exit(seq, "read", ret);
                Ok(out)
            }
            Builtin::Write => {
                let fd = self.fd_arg(&args[0], "write", pc)?;
                let data = args[1].to_string();
                self.write_fd(fd, &data, &args[1], pc).map(Value::int)
            }
            Builtin::Close => {
                let fd = self.fd_arg(&args[0], "close", pc)?;
                let seq = self.sys_enter("close", vec![EventArg::fd(fd)], pc)?;
                let ret = if self.open_files.remove(&fd).is_some() { 0 } else { EBADF };
                if self.log_fd == Some(fd) {
                    self.log_fd = None;
                }
                self.sys_exit(seq, "close", ret);
                Ok(Value::int(ret))
            }
            Builtin::Connect => {
                let url = self.str_arg(&args[0], "connect", pc)?.to_string();
                let (scheme, host, port) = resolve_connect(&url);
                let seq = self.sys_enter(
                    "connect",
                    vec![
                        EventArg(ArgKind::Scheme, ArgValue::Str(scheme)),
                        EventArg(ArgKind::Host, ArgValue::Str(host)),
                        EventArg(ArgKind::Port, ArgValue::Int(port)),
                    ],
                    pc,
                )?;
                let fd = self.alloc_fd(OpenFile::Socket);
                self.sys_exit(seq, "connect", fd);
                Ok(Value::new(Kind::Fd(fd)))
            }
            Builtin::Send => {
                let fd = self.fd_arg(&args[0], "send", pc)?;
                let data = args[1].to_string();
                self.note_sensitive_write(fd, &args[1].taint);
                let seq = self.sys_enter("send", vec![EventArg::fd(fd), EventArg::len(data.len())], pc)?;
                let ret = match self.open_files.get(&fd) {
                    Some(OpenFile::Socket) => data.len() as i64,
                    _ => EBADF,
                };
                self.sys_exit(seq, "send", ret);
                Ok(Value::int(ret))
            }
            Builtin::Recv => {
                let fd = self.fd_arg(&args[0], "recv", pc)?;
                let seq = self.sys_enter("recv", vec![EventArg::fd(fd)], pc)?;
                self.sys_exit(seq, "recv", 0);
                Ok(Value::str(""))
            }
            Builtin::Exec => {
                let path = normalize_path(self.str_arg(&args[0], "exec", pc)?);
                let argv: Vec<String> = match args.get(1).map(|a| &a.kind) {
                    None => vec![path.clone()],
                    Some(Kind::List(items)) => items.iter().map(|v| v.to_string()).collect(),
                    Some(_) => return self.err(pc, "exec argv must be a list"),
                };
                let seq = self.sys_enter(
                    "execve",
                    vec![EventArg::path(path.clone()), EventArg(ArgKind::Argv, ArgValue::List(argv))],
                    pc,
                )?;
                let ret = if self.vfs.get(&path).is_some() { 0 } else { ENOENT };
                self.sys_exit(seq, "execve", ret);
                Ok(Value::int(ret))
            }
            Builtin::Stat => {
                let path = normalize_path(self.str_arg(&args[0], "stat", pc)?);
                let ret = match self.vfs.get(&path) {
                    Some(c) => c.len() as i64,
                    None if self.vfs.is_dir(&path) => 0,
                    None => ENOENT,
                };
                self.path_call("stat", vec![EventArg::path(path)], ret, pc)
            }
            Builtin::Access => {
                let path = normalize_path(self.str_arg(&args[0], "access", pc)?);
                let ret = if self.vfs.exists(&path) { 0 } else { ENOENT };
                self.path_call("access", vec![EventArg::path(path)], ret, pc)
            }
            Builtin::Chmod => {
                let path = normalize_path(self.str_arg(&args[0], "chmod", pc)?);
                let mode = args[1].to_string();
                let ret = if self.vfs.exists(&path) { 0 } else { ENOENT };
                self.path_call("fchmod", vec![EventArg::path(path), EventArg::mode(mode)], ret, pc)
            }
            Builtin::Unlink => {
                let path = normalize_path(self.str_arg(&args[0], "unlink", pc)?);
                let seq = self.sys_enter("unlink", vec![EventArg::path(path.clone())], pc)?;
                let ret = if self.vfs.remove(&path) { 0 } else { ENOENT };
                self.sys_exit(seq, "unlink", ret);
                Ok(Value::int(ret))
            }
            Builtin::Mkdir => {
                let path = normalize_path(self.str_arg(&args[0], "mkdir", pc)?);
                let seq = self.sys_enter("mkdir", vec![EventArg::path(path.clone())], pc)?;
                let ret = if self.vfs.mkdir(&path) { 0 } else { EEXIST };
                self.sys_exit(seq, "mkdir", ret);
                Ok(Value::int(ret))
            }
            Builtin::Rename => {
                let from = normalize_path(self.str_arg(&args[0], "rename", pc)?);
                let to = normalize_path(self.str_arg(&args[1], "rename", pc)?);
                let seq = self.sys_enter(
                    "rename",
                    vec![EventArg::path(from.clone()), EventArg::path(to.clone())],
                    pc,
                )?;
                let ret = if self.vfs.rename(&from, &to) { 0 } else { ENOENT };
                self.sys_exit(seq, "rename", ret);
                Ok(Value::int(ret))
            }
            Builtin::Urlparse => {
                let url = self.str_arg(&args[0], "urlparse", pc)?;
                let p = urlparse(url);
                let port = match p.port {
                    Some(n) => Value::int(n),
                    None => Value::UNIT,
                };
                let mut m = BTreeMap::new();
                m.insert("scheme".to_string(), Value::str(&p.scheme));
                m.insert("netloc".to_string(), Value::str(&p.netloc));
                m.insert("host".to_string(), Value::str(&p.host));
                m.insert("hostname".to_string(), Value::str(&p.host));
                m.insert("port".to_string(), port);
                m.insert("path".to_string(), Value::str(&p.path));
                Ok(Value::map(m))
            }
            Builtin::Hash => {
                let digest = Sha256::digest(args[0].to_string().as_bytes());
                Ok(Value::str(&hex::encode(digest)))
            }
            Builtin::Print => {
                let line = args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
                self.output.push(line);
                Ok(Value::UNIT)
            }
            Builtin::Log => {
                let fd = match self.log_fd {
                    Some(fd) => fd,
                    None => match self.open("/app.log", "a", pc)?.kind {
                        Kind::Fd(fd) => {
                            self.log_fd = Some(fd);
                            fd
                        }
                        _ => return self.err(pc, "cannot open log"),
                    },
                };
                let mut line = args[0].to_string();
                line.push('\n');
                self.write_fd(fd, &line, &args[0], pc)?;
                Ok(Value::UNIT)
            }
            Builtin::Input => Ok(self.input.clone()),
            Builtin::Len => {
                let n = match &args[0].kind {
                    Kind::Str(s) => s.chars().count(),
                    Kind::List(l) => l.len(),
                    Kind::Map(m) => m.len(),
                    _ => return self.err(pc, format!("object of type {} has no len()", args[0].type_name())),
                };
                Ok(Value::int(n as i64))
            }
            Builtin::Str => Ok(Value::str(&args[0].to_string())),
            Builtin::Int => match &args[0].kind {
                Kind::Int(i) => Ok(Value::int(*i)),
                Kind::Bool(b) => Ok(Value::int(*b as i64)),
                Kind::Str(s) => match s.trim().parse::<i64>() {
                    Ok(i) => Ok(Value::int(i)),
                    Err(_) => self.err(pc, format!("invalid literal for int(): {:?}", &**s)),
                },
                _ => self.err(pc, format!("int() argument must be a str or int, not {}", args[0].type_name())),
            },
            Builtin::PathJoin => {
                let mut out = String::new();
                for a in &args {
                    let part = self.str_arg(a, "path_join", pc)?;
                    if part.starts_with('/') {
                        out = part.to_string();
                    } else if out.is_empty() || out.ends_with('/') {
                        out.push_str(part);
                    } else {
                        out.push('/');
                        out.push_str(part);
                    }
                }
                Ok(Value::str(&out))
            }
        }
    }

    fn str_arg<'a>(&self, v: &'a Value, func: &str, pc: u32) -> Step<&'a str> {
        match &v.kind {
            Kind::Str(s) => Ok(s),
            _ => self.err(pc, format!("{func}() expects a str, not {}", v.type_name())),
        }
    }

    fn fd_arg(&self, v: &Value, func: &str, pc: u32) -> Step<i64> {
        match v.kind {
            Kind::Fd(fd) | Kind::Int(fd) => Ok(fd),
            _ => self.err(pc, format!("{func}() expects a file descriptor, not {}", v.type_name())),
        }
    }

    fn alloc_fd(&mut self, f: OpenFile) -> i64 {
        let fd = self.next_fd;
        self.next_fd += 1;
        self.open_files.insert(fd, f);
        fd
    }

    fn path_call(&mut self, name: &str, args: Vec<EventArg>, ret: i64, pc: u32) -> Step<Value> {
        let seq = self.sys_enter(name, args, pc)?;
        self.sys_exit(seq, name, ret);
        Ok(Value::int(ret))
    }

    fn open(&mut self, path: &str, mode: &str, pc: u32) -> Step<Value> {
        let seq = self.sys_enter("openat", vec![EventArg::path(path), EventArg::mode(mode)], pc)?;
        let creates = mode.contains(['w', 'a', 'x', 'c']);
        let ret = if self.vfs.is_dir(path) {
            EISDIR
        } else if mode.contains('x') && self.vfs.get(path).is_some() {
            EEXIST
        } else if self.vfs.get(path).is_none() && !creates {
            ENOENT
        } else {
            if mode.contains(['w', 'x']) || self.vfs.get(path).is_none() {
                self.vfs.insert(path, "");
            }
            self.alloc_fd(OpenFile::File {
                path: path.to_string(),
                pos: 0,
                append: mode.contains('a'),
            })
        };
        self.sys_exit(seq, "openat", ret);
        Ok(if ret >= 0 {
            Value::new(Kind::Fd(ret))
        } else {
            Value::int(ret)
        })
    }

    fn write_fd(&mut self, fd: i64, data: &str, src: &Value, pc: u32) -> Step<i64> {
        self.note_sensitive_write(fd, &src.taint);
        let seq = self.sys_enter("write", vec![EventArg::fd(fd), EventArg::len(data.len())], pc)?;
        let ret = match self.open_files.get_mut(&fd) {
            Some(OpenFile::File { path, pos, append }) => match self.vfs.get_mut(path) {
                Some(content) => {
                    if *append || *pos >= content.len() {
                        content.push_str(data);
                        *pos = content.len();
                    } else {
                        let end = (*pos + data.len()).min(content.len());
                        if content.is_char_boundary(*pos) && content.is_char_boundary(end) {
                            content.replace_range(*pos..end, data);
                        } else {
                            content.push_str(data);
                        }
                        *pos += data.len();
                    }
                    data.len() as i64
                }
                None => EBADF,
            },
            Some(OpenFile::Socket) => data.len() as i64,
            None => EBADF,
        };
        self.sys_exit(seq, "write", ret);
        Ok(ret)
    }
}
