// evmioc: exploit forensics over EVM traces and archived block states
// Copyright 2026 The evmioc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arith.hpp"
#include "digest.hpp"
#include "opcodes.hpp"
#include "state.hpp"
#include "trace.hpp"
#include "transaction.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace evmioc
{
enum class ExceptionKind
{
    out_of_gas,
    revert,
    stack_underflow,
    stack_overflow,
    invalid_jump,
    invalid_opcode,
    static_violation,
    insufficient_balance,
};

constexpr std::string_view to_string(ExceptionKind k) noexcept
{
    switch (k)
    {
    case ExceptionKind::out_of_gas:
        return "outOfGas";
    case ExceptionKind::revert:
        return "revert";
    case ExceptionKind::stack_underflow:
        return "stackUnderflow";
    case ExceptionKind::stack_overflow:
        return "stackOverflow";
    case ExceptionKind::invalid_jump:
        return "invalidJump";
    case ExceptionKind::invalid_opcode:
        return "invalidOpcode";
    case ExceptionKind::static_violation:
        return "staticViolation";
    case ExceptionKind::insufficient_balance:
        return "insufficientBalance";
    }
    return "?";
}

struct LogEntry
{
    Address address;
    std::vector<Word256> topics;
    Bytes data;

    bool operator==(const LogEntry&) const = default;
};

/// Activation record <id, M, pc, l, s>, plus the call plumbing needed to resume the caller.
struct ActivationRecord
{
    Address id;            ///< storage/balance context (the executing account)
    Address code_address;  ///< where M came from; differs from id under DELEGATECALL
    Address caller;
    Wei value = 0;
    std::shared_ptr<const Bytes> code;
    std::shared_ptr<const std::vector<bool>> jumpdests;
    std::uint64_t pc = 0;
    Bytes calldata;  ///< read-only input l
    Bytes memory;    ///< scratch memory
    std::vector<Word256> stack;
    Gas gas = 0;
    bool is_static = false;

    std::size_t journal_mark = 0;
    std::size_t log_mark = 0;
    std::size_t call_step = 0;  ///< index in the trace of the call that created this frame
    std::uint64_t ret_offset = 0;
    std::uint64_t ret_size = 0;

    std::uint8_t current_op() const { return pc < code->size() ? (*code)[pc] : std::uint8_t{OP_STOP}; }
};

/// Stack of activation records. An exception replaces the top frame and unwinds immediately,
/// so `exception` is only observable once the stack is empty (EXC . epsilon).
struct ActivationStack
{
    std::vector<ActivationRecord> frames;
    std::optional<ExceptionKind> exception;

    bool empty() const noexcept { return frames.empty(); }
    const ActivationRecord& top() const { return frames.back(); }
    ActivationRecord& top() { return frames.back(); }
};

struct EvmState
{
    ActivationStack activations;
    GlobalState sigma;
};

enum class TxStatus
{
    success,
    exception,
};

struct ExecutionOutcome
{
    GlobalState final_state;
    TxStatus status = TxStatus::success;
    std::optional<ExceptionKind> exception;
    std::vector<LogEntry> logs;
    Gas gas_used = 0;
    Bytes return_data;
    std::vector<TraceStep> trace;

    TraceSummary summary() const { return {gas_used, status == TxStatus::exception, return_data}; }
};

/// Total instructions executed by every interpreter in the process. Lets callers assert that
/// an analysis path performed no replay.
inline std::atomic<std::uint64_t>& interpreter_step_counter()
{
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

inline std::vector<bool> analyze_jumpdests(ByteView code)
{
    std::vector<bool> map(code.size(), false);
    for (std::size_t i = 0; i < code.size(); ++i)
    {
        const auto op = code[i];
        if (op == OP_JUMPDEST)
            map[i] = true;
        else if (is_push(op))
            i += static_cast<std::size_t>(op - OP_PUSH1 + 1);
    }
    return map;
}

/// Small-step interpreter over one transaction's activation stack.
class Interpreter
{
public:
    explicit Interpreter(GlobalState sigma) { state_.sigma = std::move(sigma); }

    /// Pushes the outermost frame <to, M, 0, data, epsilon>.
    void begin(const Address& to, const Address& caller, const Wei& value, Bytes calldata, Gas gas)
    {
        ActivationRecord f;
        f.id = to;
        f.code_address = to;
        f.caller = caller;
        f.value = value;
        load_code(f, to);
        f.calldata = std::move(calldata);
        f.gas = gas;
        gas_limit_ = gas;
        state_.activations.frames.push_back(std::move(f));
    }

    bool halted() const noexcept { return state_.activations.empty(); }
    const EvmState& state() const noexcept { return state_; }
    EvmState& state() noexcept { return state_; }
    const std::vector<TraceStep>& trace() const noexcept { return trace_; }
    std::vector<TraceStep> take_trace() { return std::move(trace_); }
    const std::vector<LogEntry>& logs() const noexcept { return logs_; }
    const Bytes& return_data() const noexcept { return return_data_; }
    Gas gas_left() const noexcept { return gas_left_; }
    Gas gas_limit() const noexcept { return gas_limit_; }

    /// Executes the instruction at the top frame's pc and returns its trace record.
    const TraceStep& step()
    {
        ++interpreter_step_counter();
        ActivationRecord& f = state_.activations.top();
        const std::uint8_t op = f.current_op();
        const OpInfo& info = op_info(op);

        TraceStep ts;
        ts.pc = f.pc;
        ts.op = op;
        ts.gas = f.gas;
        ts.gas_cost = info.gas;
        ts.depth = static_cast<std::uint32_t>(state_.activations.frames.size());
        ts.stack = f.stack;
        const std::size_t index = trace_.size();
        trace_.push_back(std::move(ts));

        if (!is_supported(op))
        {
            trace_[index].gas_cost = 0;
            fail(ExceptionKind::invalid_opcode);
            return trace_[index];
        }
        if (f.stack.size() < info.inputs)
        {
            fail(ExceptionKind::stack_underflow);
            return trace_[index];
        }
        if (f.stack.size() - info.inputs + info.outputs > kMaxStackDepth)
        {
            fail(ExceptionKind::stack_overflow);
            return trace_[index];
        }
        if (f.gas < info.gas)
        {
            fail(ExceptionKind::out_of_gas);
            return trace_[index];
        }
        f.gas -= info.gas;
        execute(op, index);
        return trace_[index];
    }

private:
    struct JournalEntry
    {
        enum class Kind
        {
            storage,
            balance,
            created,
        } kind;
        Address account;
        Word256 key;
        Word256 previous;
    };

    void load_code(ActivationRecord& f, const Address& code_address)
    {
        const auto* acc = state_.sigma.find(code_address);
        const auto& store = state_.sigma.code_store();
        const auto it = acc != nullptr ? store.find(acc->code_hash) : store.end();
        if (it == store.end())
        {
            static const auto kEmpty = std::make_shared<const Bytes>();
            static const auto kNoDests = std::make_shared<const std::vector<bool>>();
            f.code = kEmpty;
            f.jumpdests = kNoDests;
            return;
        }
        f.code = it->second;
        auto& dests = jumpdest_cache_[it->first];
        if (!dests)
            dests = std::make_shared<const std::vector<bool>>(analyze_jumpdests(*it->second));
        f.jumpdests = dests;
    }

    Word256 pop()
    {
        auto& s = state_.activations.top().stack;
        Word256 v = std::move(s.back());
        s.pop_back();
        return v;
    }

    void push(Word256 v) { state_.activations.top().stack.push_back(std::move(v)); }

    /// Validates [offset, offset+size) against the memory cap; false means out-of-gas.
    static bool memory_range(const Word256& offset, const Word256& size, std::uint64_t& off, std::uint64_t& len)
    {
        if (size == 0)
        {
            off = 0;
            len = 0;
            return true;
        }
        if (offset > Word256{kMaxMemoryBytes} || size > Word256{kMaxMemoryBytes})
            return false;
        off = static_cast<std::uint64_t>(offset);
        len = static_cast<std::uint64_t>(size);
        return off + len <= kMaxMemoryBytes;
    }

    static void expand(Bytes& memory, std::uint64_t end)
    {
        if (end > memory.size())
            memory.resize(static_cast<std::size_t>((end + 31) / 32 * 32), 0);
    }

    static Bytes read_memory(Bytes& memory, std::uint64_t off, std::uint64_t len)
    {
        if (len == 0)
            return {};
        expand(memory, off + len);
        return Bytes(memory.begin() + static_cast<std::ptrdiff_t>(off),
                     memory.begin() + static_cast<std::ptrdiff_t>(off + len));
    }

    void set_storage(const Address& a, const Word256& key, const Word256& value)
    {
        journal_.push_back({JournalEntry::Kind::storage, a, key, state_.sigma.storage(a, key)});
        state_.sigma.set_storage(a, key, value);
    }

    void journaled_transfer(const Address& from, const Address& to, const Wei& value)
    {
        if (!state_.sigma.exists(to))
            journal_.push_back({JournalEntry::Kind::created, to, 0, 0});
        if (value == 0 || from == to)
        {
            state_.sigma.get_or_create(to);
            return;
        }
        journal_.push_back({JournalEntry::Kind::balance, from, 0, state_.sigma.balance(from)});
        journal_.push_back({JournalEntry::Kind::balance, to, 0, state_.sigma.balance(to)});
        transfer_in_place(state_.sigma, from, to, value);
    }

    void revert_to(std::size_t mark)
    {
        while (journal_.size() > mark)
        {
            const JournalEntry& e = journal_.back();
            switch (e.kind)
            {
            case JournalEntry::Kind::storage:
                state_.sigma.set_storage(e.account, e.key, e.previous);
                break;
            case JournalEntry::Kind::balance:
                state_.sigma.set_balance(e.account, e.previous);
                break;
            case JournalEntry::Kind::created:
                state_.sigma.erase(e.account);
                break;
            }
            journal_.pop_back();
        }
    }

    /// Pops the top frame and resumes the caller with `status` on its stack.
    void finish_frame(bool success, Bytes output, bool refund_gas)
    {
        ActivationRecord done = std::move(state_.activations.frames.back());
        state_.activations.frames.pop_back();
        if (!success)
        {
            revert_to(done.journal_mark);
            logs_.resize(done.log_mark);
        }
        if (state_.activations.empty())
        {
            gas_left_ = refund_gas ? done.gas : 0;
            return_data_ = std::move(output);
            return;
        }
        ActivationRecord& caller = state_.activations.top();
        if (refund_gas)
            caller.gas += done.gas;
        if (done.ret_size > 0 && !output.empty())
        {
            const auto n = std::min<std::uint64_t>(done.ret_size, output.size());
            expand(caller.memory, done.ret_offset + n);
            std::copy_n(output.begin(), n, caller.memory.begin() + static_cast<std::ptrdiff_t>(done.ret_offset));
        }
        caller.stack.emplace_back(success ? 1 : 0);
        trace_[done.call_step].call->return_status = Word256{success ? 1u : 0u};
    }

    void fail(ExceptionKind kind)
    {
        if (state_.activations.frames.size() == 1)
            state_.activations.exception = kind;
        finish_frame(false, {}, false);
    }

    void execute(std::uint8_t op, std::size_t index)
    {
        ActivationRecord& f = state_.activations.top();
        auto& s = f.stack;
        const auto n = s.size();

        if (auto iop = int_op(op))
        {
            const std::size_t k = arity(*iop);
            Word256 operands[3];
            for (std::size_t i = 0; i < k; ++i)
                operands[i] = s[n - 1 - i];
            Word256 r = wrap_arith_result(*iop, std::span<const Word256>(operands, k));
            s.resize(n - k);
            s.push_back(std::move(r));
            ++f.pc;
            return;
        }
        if (is_push(op))
        {
            const std::size_t width = op - OP_PUSH1 + 1;
            Word256 v = 0;
            for (std::size_t i = 0; i < width; ++i)
            {
                const std::size_t at = f.pc + 1 + i;
                v = (v << 8) | (at < f.code->size() ? (*f.code)[at] : 0);
            }
            s.push_back(std::move(v));
            f.pc += 1 + width;
            return;
        }
        if (op >= OP_DUP1 && op <= OP_DUP16)
        {
            s.push_back(s[n - 1 - (op - OP_DUP1)]);
            ++f.pc;
            return;
        }
        if (op >= OP_SWAP1 && op <= OP_SWAP16)
        {
            std::swap(s[n - 1], s[n - 2 - (op - OP_SWAP1)]);
            ++f.pc;
            return;
        }

        switch (op)
        {
        case OP_STOP:
            finish_frame(true, {}, true);
            return;
        case OP_LT:
        {
            const Word256 a = pop(), b = pop();
            push(a < b ? 1 : 0);
            break;
        }
        case OP_GT:
        {
            const Word256 a = pop(), b = pop();
            push(a > b ? 1 : 0);
            break;
        }
        case OP_EQ:
        {
            const Word256 a = pop(), b = pop();
            push(a == b ? 1 : 0);
            break;
        }
        case OP_ISZERO:
            s.back() = s.back() == 0 ? 1 : 0;
            break;
        case OP_AND:
        {
            const Word256 a = pop();
            s.back() &= a;
            break;
        }
        case OP_OR:
        {
            const Word256 a = pop();
            s.back() |= a;
            break;
        }
        case OP_NOT:
            s.back() = ~s.back();
            break;
        case OP_SHA3:
        {
            const Word256 offset = pop(), size = pop();
            std::uint64_t off = 0, len = 0;
            if (!memory_range(offset, size, off, len))
                return fail(ExceptionKind::out_of_gas);
            const Bytes data = read_memory(f.memory, off, len);
            push(word_from_bytes(digest(data).bytes));
            break;
        }
        case OP_BALANCE:
            s.back() = state_.sigma.balance(Address::from_word(s.back()));
            break;
        case OP_CALLER:
            push(f.caller.to_word());
            break;
        case OP_CALLVALUE:
            push(f.value);
            break;
        case OP_CALLDATALOAD:
        {
            const Word256 offset = s.back();
            std::array<std::uint8_t, 32> word{};
            if (offset < Word256{f.calldata.size()})
            {
                const auto off = static_cast<std::size_t>(offset);
                std::copy_n(f.calldata.begin() + static_cast<std::ptrdiff_t>(off),
                            std::min<std::size_t>(32, f.calldata.size() - off), word.begin());
            }
            s.back() = word_from_bytes(word);
            break;
        }
        case OP_CALLDATASIZE:
            push(Word256{f.calldata.size()});
            break;
        case OP_SELFBALANCE:
            push(state_.sigma.balance(f.id));
            break;
        case OP_POP:
            s.pop_back();
            break;
        case OP_MLOAD:
        {
            std::uint64_t off = 0, len = 0;
            if (!memory_range(s.back(), 32, off, len))
                return fail(ExceptionKind::out_of_gas);
            const Bytes data = read_memory(f.memory, off, len);
            s.back() = word_from_bytes(data);
            break;
        }
        case OP_MSTORE:
        {
            const Word256 offset = pop(), value = pop();
            std::uint64_t off = 0, len = 0;
            if (!memory_range(offset, 32, off, len))
                return fail(ExceptionKind::out_of_gas);
            expand(f.memory, off + 32);
            const auto b = word_to_bytes(value);
            std::copy(b.begin(), b.end(), f.memory.begin() + static_cast<std::ptrdiff_t>(off));
            break;
        }
        case OP_SLOAD:
            s.back() = state_.sigma.storage(f.id, s.back());
            break;
        case OP_SSTORE:
        {
            if (f.is_static)
                return fail(ExceptionKind::static_violation);
            const Word256 key = pop(), value = pop();
            trace_[index].storage_write = StorageWrite{key, value};
            set_storage(f.id, key, value);
            break;
        }
        case OP_JUMP:
        {
            const Word256 dest = pop();
            if (dest >= Word256{f.code->size()} || !(*f.jumpdests)[static_cast<std::size_t>(dest)])
                return fail(ExceptionKind::invalid_jump);
            f.pc = static_cast<std::uint64_t>(dest);
            return;
        }
        case OP_JUMPI:
        {
            const Word256 dest = pop(), cond = pop();
            if (cond == 0)
                break;
            if (dest >= Word256{f.code->size()} || !(*f.jumpdests)[static_cast<std::size_t>(dest)])
                return fail(ExceptionKind::invalid_jump);
            f.pc = static_cast<std::uint64_t>(dest);
            return;
        }
        case OP_PC:
            push(Word256{f.pc});
            break;
        case OP_GAS:
            push(Word256{static_cast<std::uint64_t>(f.gas)});
            break;
        case OP_JUMPDEST:
            break;
        case OP_LOG0:
        case OP_LOG1:
        case OP_LOG2:
        {
            if (f.is_static)
                return fail(ExceptionKind::static_violation);
            const Word256 offset = pop(), size = pop();
            LogEntry log;
            log.address = f.id;
            for (int i = 0; i < op - OP_LOG0; ++i)
                log.topics.push_back(pop());
            std::uint64_t off = 0, len = 0;
            if (!memory_range(offset, size, off, len))
                return fail(ExceptionKind::out_of_gas);
            log.data = read_memory(f.memory, off, len);
            logs_.push_back(std::move(log));
            break;
        }
        case OP_RETURN:
        case OP_REVERT:
        {
            const Word256 offset = pop(), size = pop();
            std::uint64_t off = 0, len = 0;
            if (!memory_range(offset, size, off, len))
                return fail(ExceptionKind::out_of_gas);
            Bytes output = read_memory(f.memory, off, len);
            if (op == OP_REVERT && state_.activations.frames.size() == 1)
                state_.activations.exception = ExceptionKind::revert;
            finish_frame(op == OP_RETURN, std::move(output), true);
            return;
        }
        case OP_CALL:
        case OP_STATICCALL:
        case OP_DELEGATECALL:
            return call(op, index);
        default:
            return fail(ExceptionKind::invalid_opcode);
        }
        ++state_.activations.top().pc;
    }

    void call(std::uint8_t op, std::size_t index)
    {
        ActivationRecord& f = state_.activations.top();
        pop();  // requested gas: ignored, all remaining gas minus the retained stipend is forwarded
        const Address target = Address::from_word(pop());
        const Wei value = op == OP_CALL ? pop() : Wei{0};
        const Word256 args_offset = pop(), args_size = pop(), ret_offset = pop(), ret_size = pop();

        auto& step = trace_[index];
        step.call = CallInfo{target, value, std::nullopt, {}};

        std::uint64_t a_off = 0, a_len = 0, r_off = 0, r_len = 0;
        if (!memory_range(args_offset, args_size, a_off, a_len) || !memory_range(ret_offset, ret_size, r_off, r_len))
            return fail(ExceptionKind::out_of_gas);
        Bytes input = read_memory(f.memory, a_off, a_len);
        expand(f.memory, r_off + r_len);
        step.memory = f.memory;
        step.call->input = input;
        if (f.is_static && value != 0)
            return fail(ExceptionKind::static_violation);

        ++f.pc;
        const Address self = f.id;
        if (state_.activations.frames.size() >= kMaxCallDepth || state_.sigma.balance(self) < value)
        {
            f.stack.emplace_back(0);
            step.call->return_status = Word256{0};
            return;
        }

        ActivationRecord callee;
        callee.journal_mark = journal_.size();
        callee.log_mark = logs_.size();
        if (op == OP_CALL)
            journaled_transfer(self, target, value);

        callee.code_address = target;
        load_code(callee, target);
        if (callee.code->empty())
        {
            // Pure value transfer: no nested frame.
            f.stack.emplace_back(1);
            step.call->return_status = Word256{1};
            return;
        }

        switch (op)
        {
        case OP_CALL:
            callee.id = target;
            callee.caller = self;
            callee.value = value;
            callee.is_static = f.is_static;
            break;
        case OP_STATICCALL:
            callee.id = target;
            callee.caller = self;
            callee.value = 0;
            callee.is_static = true;
            break;
        default:  // DELEGATECALL: callee code runs in the caller's context
            callee.id = self;
            callee.caller = f.caller;
            callee.value = f.value;
            callee.is_static = f.is_static;
            break;
        }
        const Gas forwarded = std::max<Gas>(0, f.gas - kCallRetainedGas);
        f.gas -= forwarded;
        callee.gas = forwarded;
        callee.calldata = std::move(input);
        callee.call_step = index;
        callee.ret_offset = r_off;
        callee.ret_size = r_len;
        state_.activations.frames.push_back(std::move(callee));
    }

    EvmState state_;
    std::vector<TraceStep> trace_;
    std::vector<LogEntry> logs_;
    std::vector<JournalEntry> journal_;
    std::map<Hash32, std::shared_ptr<const std::vector<bool>>> jumpdest_cache_;
    Bytes return_data_;
    Gas gas_left_ = 0;
    Gas gas_limit_ = 0;
};

/// Called with the pre-step machine state before every instruction.
using StepObserver = std::function<void(const EvmState&)>;

inline constexpr Gas kDefaultTxGas = 30'000'000;

/// Executes T against sigma: credits value to `to`, then runs its code until the activation
/// stack empties (success) or an exception reaches the outermost frame (rollback to sigma).
inline ExecutionOutcome execute_transaction(const GlobalState& sigma, const Transaction& tx,
                                            Gas gas_limit = kDefaultTxGas, const StepObserver& observer = {})
{
    ExecutionOutcome out;
    if (sigma.balance(tx.sender) < tx.value || !sigma.exists(tx.sender))
    {
        out.final_state = sigma;
        out.status = TxStatus::exception;
        out.exception = ExceptionKind::insufficient_balance;
        return out;
    }
    GlobalState credited = apply_balance_transfer(sigma, tx.sender, tx.to, tx.value);
    if (credited.code(tx.to).empty())
    {
        out.final_state = std::move(credited);
        return out;
    }

    Interpreter vm{std::move(credited)};
    vm.begin(tx.to, tx.sender, tx.value, tx.data, gas_limit);
    while (!vm.halted())
    {
        if (observer)
            observer(vm.state());
        vm.step();
    }

    const auto& exc = vm.state().activations.exception;
    out.trace = vm.take_trace();
    out.return_data = vm.return_data();
    out.gas_used = gas_limit - vm.gas_left();
    if (exc)
    {
        out.status = TxStatus::exception;
        out.exception = *exc;
        out.final_state = sigma;
    }
    else
    {
        out.logs = vm.logs();
        out.final_state = std::move(vm.state().sigma);
    }
    return out;
}
}  // namespace evmioc
