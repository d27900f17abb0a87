package demo;

import java.util.Deque;

public class UndoStack {
    String undo(Deque<String> stack, int size) {
        return stack.pop();
    }
}
